#ifndef DASMC_DATASET_HPP
#define DASMC_DATASET_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <zlib.h>

#include "dasmc/network.hpp"
#include "dasmc/rng.hpp"

namespace dasmc {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows [0, prefix_end) are fully annealed in; rows [prefix_end, block_end)
/// are the newest block. total_n is the full dataset size used for
/// likelihood scaling.
struct SubsetWindow {
  Eigen::Index prefix_end = 0;
  Eigen::Index block_end = 0;
  Eigen::Index total_n = 0;
};

inline void validate(const SubsetWindow& w) {
  if (w.prefix_end < 0 || w.prefix_end > w.block_end || w.block_end > w.total_n)
    throw std::invalid_argument("SubsetWindow: need 0 <= prefix_end <= block_end <= total_n");
}

/// Feature rows with either class labels (num_classes > 0) or real-valued
/// regression targets. Rows are stored in the run's fixed order; perm maps
/// each row back to its source index before shuffling.
struct Dataset {
  RowMatrixXd features;
  std::vector<int> labels;
  Eigen::VectorXd targets;
  int num_classes = 0;
  std::vector<Eigen::Index> perm;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool is_classification() const { return num_classes > 0; }
};

namespace detail {

inline std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                               const char* field) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(std::string("IDX: truncated while reading ") + field + " at offset " +
                      std::to_string(offset));
  }
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

inline void write_be32(std::vector<unsigned char>& bytes, std::uint32_t v) {
  bytes.push_back(static_cast<unsigned char>(v >> 24));
  bytes.push_back(static_cast<unsigned char>(v >> 16));
  bytes.push_back(static_cast<unsigned char>(v >> 8));
  bytes.push_back(static_cast<unsigned char>(v));
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Parse IDX image/label byte streams into a dataset; pixels are scaled to
/// [0, 1] by dividing by 255.
inline Dataset parse_idx(const std::vector<unsigned char>& image_bytes,
                         const std::vector<unsigned char>& label_bytes) {
  const std::uint32_t image_magic = detail::read_be32(image_bytes, 0, "image magic");
  if (image_magic != kIdxImageMagic) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "IDX image magic: expected 0x%08x, got 0x%08x at offset 0",
                  kIdxImageMagic, image_magic);
    throw FormatError(buf);
  }
  const std::uint32_t n = detail::read_be32(image_bytes, 4, "image count");
  const std::uint32_t rows = detail::read_be32(image_bytes, 8, "image rows");
  const std::uint32_t cols = detail::read_be32(image_bytes, 12, "image cols");
  const std::size_t pixels = std::size_t(n) * rows * cols;
  if (image_bytes.size() != 16 + pixels) {
    throw FormatError("IDX image payload: expected " + std::to_string(16 + pixels) +
                      " bytes, got " + std::to_string(image_bytes.size()));
  }

  const std::uint32_t label_magic = detail::read_be32(label_bytes, 0, "label magic");
  if (label_magic != kIdxLabelMagic) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "IDX label magic: expected 0x%08x, got 0x%08x at offset 0",
                  kIdxLabelMagic, label_magic);
    throw FormatError(buf);
  }
  const std::uint32_t n_labels = detail::read_be32(label_bytes, 4, "label count");
  if (label_bytes.size() != 8 + n_labels) {
    throw FormatError("IDX label payload: expected " + std::to_string(8 + n_labels) +
                      " bytes, got " + std::to_string(label_bytes.size()));
  }
  if (n_labels != n) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                      std::to_string(n_labels) + " labels");
  }

  Dataset d;
  d.features.resize(n, Eigen::Index(rows) * cols);
  d.labels.resize(n);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const unsigned char* px = image_bytes.data() + 16 + std::size_t(i) * rows * cols;
    for (std::uint32_t p = 0; p < rows * cols; ++p)
      d.features(i, p) = static_cast<double>(px[p]) / 255.0;
    d.labels[i] = label_bytes[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = max_label + 1;
  d.perm.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) d.perm[i] = i;
  return d;
}

/// Inverse of parse_idx for square images; used for round-trip checks.
inline std::pair<std::vector<unsigned char>, std::vector<unsigned char>> serialize_idx(
    const Dataset& d, std::uint32_t rows, std::uint32_t cols) {
  if (Eigen::Index(rows) * cols != d.dim())
    throw std::invalid_argument("serialize_idx: rows*cols must equal feature dimension");
  std::vector<unsigned char> images, labels;
  detail::write_be32(images, kIdxImageMagic);
  detail::write_be32(images, static_cast<std::uint32_t>(d.n()));
  detail::write_be32(images, rows);
  detail::write_be32(images, cols);
  for (Eigen::Index i = 0; i < d.n(); ++i)
    for (Eigen::Index p = 0; p < d.dim(); ++p)
      images.push_back(static_cast<unsigned char>(std::lround(d.features(i, p) * 255.0)));
  detail::write_be32(labels, kIdxLabelMagic);
  detail::write_be32(labels, static_cast<std::uint32_t>(d.n()));
  for (Eigen::Index i = 0; i < d.n(); ++i)
    labels.push_back(static_cast<unsigned char>(d.labels[static_cast<std::size_t>(i)]));
  return {std::move(images), std::move(labels)};
}

namespace detail {

inline std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw FormatError("gzip: inflateInit failed");
  std::vector<unsigned char> out;
  out.reserve(in.size() * 4);
  unsigned char buf[1 << 16];
  zs.next_in = const_cast<unsigned char*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("gzip: corrupt stream (zlib rc " + std::to_string(rc) + ")");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
  return bytes;
}

}  // namespace detail

/// Load an IDX image/label file pair; gzip-compressed files are
/// decompressed transparently.
inline Dataset load_idx(const std::string& image_path, const std::string& label_path) {
  return parse_idx(detail::read_file_bytes(image_path), detail::read_file_bytes(label_path));
}

enum class SyntheticKind { kGaussianBlobs, kTwoMoons, kLinearGaussian };

/// Generated dataset; true_theta/noise_std are populated for
/// kLinearGaussian, where the posterior is available in closed form.
struct SyntheticData {
  Dataset data;
  Eigen::VectorXd true_theta;
  double noise_std = 0.0;
};

inline SyntheticData make_synthetic(SyntheticKind kind, Eigen::Index n, double noise,
                                    std::uint64_t seed, Eigen::Index dim = 2) {
  if (n < 2) throw std::invalid_argument("make_synthetic: n must be >= 2");
  RngStream rng = RngStream(seed).fork(rng_tag::kSynthetic);
  SyntheticData out;
  Dataset& d = out.data;
  switch (kind) {
    case SyntheticKind::kGaussianBlobs: {
      constexpr int kBlobs = 3;
      constexpr double kRadius = 3.0;
      d.features.resize(n, 2);
      d.labels.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % kBlobs);
        const double angle = 2.0 * std::numbers::pi * c / kBlobs;
        d.features(i, 0) = kRadius * std::cos(angle) + noise * rng.normal();
        d.features(i, 1) = kRadius * std::sin(angle) + noise * rng.normal();
        d.labels[i] = c;
      }
      d.num_classes = kBlobs;
      break;
    }
    case SyntheticKind::kTwoMoons: {
      d.features.resize(n, 2);
      d.labels.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % 2);
        const double t = std::numbers::pi * rng.uniform();
        double x, y;
        if (c == 0) {
          x = std::cos(t);
          y = std::sin(t);
        } else {
          x = 1.0 - std::cos(t);
          y = 0.5 - std::sin(t);
        }
        d.features(i, 0) = x + noise * rng.normal();
        d.features(i, 1) = y + noise * rng.normal();
        d.labels[i] = c;
      }
      d.num_classes = 2;
      break;
    }
    case SyntheticKind::kLinearGaussian: {
      d.features.resize(n, dim);
      d.targets.resize(n);
      out.true_theta = rng.normal_vector(dim);
      out.noise_std = noise;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) d.features(i, j) = rng.normal();
        d.targets[i] = d.features.row(i).dot(out.true_theta) + noise * rng.normal();
      }
      d.num_classes = 0;
      break;
    }
  }
  d.perm.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) d.perm[i] = i;
  return out;
}

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Conjugate posterior of theta for targets = features * theta + noise,
/// noise ~ N(0, noise_std^2), prior N(0, sigma^2 I).
inline GaussianPosterior linear_gaussian_posterior(const Dataset& d, double noise_std,
                                                   const PriorSpec& prior) {
  validate(prior);
  if (d.targets.size() != d.n())
    throw std::invalid_argument("linear_gaussian_posterior: dataset has no regression targets");
  const double obs_prec = 1.0 / (noise_std * noise_std);
  const Eigen::Index dim = d.dim();
  Eigen::MatrixXd precision = obs_prec * (d.features.transpose() * d.features);
  precision.diagonal().array() += 1.0 / (prior.sigma * prior.sigma);
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  GaussianPosterior post;
  post.cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  post.mean = llt.solve(obs_prec * (d.features.transpose() * d.targets));
  return post;
}

/// Copy of the dataset with rows in a fresh random order; perm composes with
/// the source dataset's perm.
inline Dataset shuffled(const Dataset& d, RngStream& rng) {
  const Eigen::Index n = d.n();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Dataset out;
  out.features.resize(n, d.dim());
  out.num_classes = d.num_classes;
  if (!d.labels.empty()) out.labels.resize(static_cast<std::size_t>(n));
  if (d.targets.size() > 0) out.targets.resize(n);
  out.perm.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.features.row(i) = d.features.row(src);
    if (!d.labels.empty()) out.labels[static_cast<std::size_t>(i)] = d.labels[static_cast<std::size_t>(src)];
    if (d.targets.size() > 0) out.targets[i] = d.targets[src];
    out.perm[static_cast<std::size_t>(i)] = d.perm[static_cast<std::size_t>(src)];
  }
  return out;
}

/// Rows [lo, hi) of the dataset.
inline Dataset slice(const Dataset& d, Eigen::Index lo, Eigen::Index hi) {
  if (lo < 0 || lo >= hi || hi > d.n()) throw std::invalid_argument("slice: range out of bounds");
  Dataset out;
  out.features = d.features.middleRows(lo, hi - lo);
  out.num_classes = d.num_classes;
  if (!d.labels.empty()) out.labels.assign(d.labels.begin() + lo, d.labels.begin() + hi);
  if (d.targets.size() > 0) out.targets = d.targets.segment(lo, hi - lo);
  out.perm.assign(d.perm.begin() + lo, d.perm.begin() + hi);
  return out;
}

/// First `count` rows of the dataset.
inline Dataset head(const Dataset& d, Eigen::Index count) { return slice(d, 0, count); }

/// Copy of the selected rows, in the given order.
inline Dataset gather(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.features.resize(n, d.dim());
  out.num_classes = d.num_classes;
  if (!d.labels.empty()) out.labels.resize(rows.size());
  if (d.targets.size() > 0) out.targets.resize(n);
  out.perm.resize(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = rows[static_cast<std::size_t>(i)];
    if (src < 0 || src >= d.n()) throw std::invalid_argument("gather: row index out of range");
    out.features.row(i) = d.features.row(src);
    if (!d.labels.empty()) out.labels[static_cast<std::size_t>(i)] = d.labels[static_cast<std::size_t>(src)];
    if (d.targets.size() > 0) out.targets[i] = d.targets[src];
    out.perm[static_cast<std::size_t>(i)] = d.perm[static_cast<std::size_t>(src)];
  }
  return out;
}

/// Prefix and block slices of a dataset under a window. The slices alias the
/// dataset; no rows are copied.
struct WindowView {
  Eigen::Ref<const RowMatrixXd> prefix_features;
  Eigen::Ref<const RowMatrixXd> block_features;
  std::span<const int> prefix_labels;
  std::span<const int> block_labels;
  Eigen::Ref<const Eigen::VectorXd> prefix_targets;
  Eigen::Ref<const Eigen::VectorXd> block_targets;
};

inline WindowView subset_window_view(const Dataset& d, const SubsetWindow& w) {
  validate(w);
  if (w.block_end > d.n())
    throw std::invalid_argument("subset_window_view: window exceeds dataset size");
  if (w.block_end == 0)
    throw std::invalid_argument("subset_window_view: empty subset");
  const Eigen::Index p = w.prefix_end;
  const Eigen::Index b = w.block_end - w.prefix_end;
  const int* lab = d.labels.empty() ? nullptr : d.labels.data();
  const Eigen::VectorXd& tg = d.targets;
  return WindowView{
      d.features.middleRows(0, p),
      d.features.middleRows(p, b),
      lab ? std::span<const int>(lab, static_cast<std::size_t>(p)) : std::span<const int>(),
      lab ? std::span<const int>(lab + p, static_cast<std::size_t>(b)) : std::span<const int>(),
      tg.size() > 0 ? tg.segment(0, p) : Eigen::Ref<const Eigen::VectorXd>(tg),
      tg.size() > 0 ? tg.segment(p, b) : Eigen::Ref<const Eigen::VectorXd>(tg),
  };
}

}  // namespace dasmc

#endif  // DASMC_DATASET_HPP
