#ifndef DASMC_RUNNER_HPP
#define DASMC_RUNNER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dasmc/annealing.hpp"
#include "dasmc/dataset.hpp"
#include "dasmc/kernels.hpp"
#include "dasmc/network.hpp"
#include "dasmc/parallel.hpp"
#include "dasmc/smc.hpp"
#include "dasmc/target.hpp"

namespace dasmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetKind { kIdx, kGaussianBlobs, kTwoMoons, kLinearGaussian };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kIdx;
  std::string train_images, train_labels;  // idx
  std::string test_images, test_labels;    // idx, optional
  Eigen::Index train_limit = 0;            // 0 keeps everything
  Eigen::Index test_limit = 0;
  Eigen::Index n = 0;  // synthetic train size
  Eigen::Index test_n = 0;
  double noise = 0.1;
  Eigen::Index dim = 2;  // linear_gaussian parameter count
};

/// Schedule settings as configured; iteration count and dataset size are
/// resolved into a ScheduleConfig once the data is loaded.
struct ScheduleSettings {
  ScheduleKind kind = ScheduleKind::kFullBatch;
  Eigen::Index initial_batch = 0;  // 0 resolves to the dataset size (full_batch only)
  Eigen::Index increment = 0;      // 0 resolves to initial_batch
  bool redraw_constant = false;    // constant scheme: fresh batch each iteration
  double beta0 = 0.1;
  double entropy_step = 1.0;
};

struct RunConfig {
  DatasetConfig dataset;
  ModelSpec model;
  PriorSpec prior;
  KernelConfig kernel;
  ScheduleSettings schedule;
  int particles = 128;
  int iterations = 1;
  std::uint64_t seed = 0;
  int eval_every = 10;
  std::string output;  // empty: no trace file written
  int threads = 1;
  double resample_fraction = 0.5;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const char* where,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(std::string(where) + ": unknown key \"" + item.key() + "\"");
  }
}

inline const json& require(const json& obj, const char* where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError(std::string(where) + ": missing required key \"" + key + "\"");
  return *it;
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : it->get<T>();
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config is not valid JSON: ") + err.what());
  }
  detail::check_keys(root, "config",
                     {"dataset", "model", "prior", "kernel", "schedule", "particles",
                      "iterations", "seed", "eval_every", "output", "threads",
                      "resample_fraction"});
  RunConfig cfg;

  const json& ds = detail::require(root, "config", "dataset");
  detail::check_keys(ds, "dataset",
                     {"kind", "train_images", "train_labels", "test_images", "test_labels",
                      "train_limit", "test_limit", "n", "test_n", "noise", "dim"});
  const std::string ds_kind = detail::require(ds, "dataset", "kind").get<std::string>();
  if (ds_kind == "idx") {
    cfg.dataset.kind = DatasetKind::kIdx;
    cfg.dataset.train_images = detail::require(ds, "dataset", "train_images").get<std::string>();
    cfg.dataset.train_labels = detail::require(ds, "dataset", "train_labels").get<std::string>();
    cfg.dataset.test_images = detail::get_or<std::string>(ds, "test_images", "");
    cfg.dataset.test_labels = detail::get_or<std::string>(ds, "test_labels", "");
    if (cfg.dataset.test_images.empty() != cfg.dataset.test_labels.empty())
      throw ConfigError("dataset: test_images and test_labels must be given together");
  } else if (ds_kind == "gaussian_blobs" || ds_kind == "two_moons" ||
             ds_kind == "linear_gaussian") {
    cfg.dataset.kind = ds_kind == "gaussian_blobs" ? DatasetKind::kGaussianBlobs
                       : ds_kind == "two_moons"    ? DatasetKind::kTwoMoons
                                                   : DatasetKind::kLinearGaussian;
    cfg.dataset.n = detail::require(ds, "dataset", "n").get<Eigen::Index>();
    if (cfg.dataset.n < 2) throw ConfigError("dataset.n: must be >= 2");
    cfg.dataset.noise = detail::get_or<double>(ds, "noise", 0.1);
    cfg.dataset.dim = detail::get_or<Eigen::Index>(ds, "dim", 2);
    cfg.dataset.test_n = detail::get_or<Eigen::Index>(ds, "test_n", 0);
  } else {
    throw ConfigError("dataset.kind: unknown kind \"" + ds_kind + "\"");
  }
  cfg.dataset.train_limit = detail::get_or<Eigen::Index>(ds, "train_limit", 0);
  cfg.dataset.test_limit = detail::get_or<Eigen::Index>(ds, "test_limit", 0);

  const json& model = detail::require(root, "config", "model");
  detail::check_keys(model, "model", {"kind", "layers", "activation", "noise_std", "dim"});
  const std::string model_kind = detail::require(model, "model", "kind").get<std::string>();
  if (model_kind == "mlp") {
    NetSpec net;
    net.layer_sizes = detail::require(model, "model", "layers").get<std::vector<int>>();
    const std::string act = detail::get_or<std::string>(model, "activation", "relu");
    if (act == "relu")
      net.activation = Activation::kRelu;
    else if (act == "tanh")
      net.activation = Activation::kTanh;
    else
      throw ConfigError("model.activation: must be \"relu\" or \"tanh\"");
    try {
      validate(net);
    } catch (const std::invalid_argument& err) {
      throw ConfigError(std::string("model.layers: ") + err.what());
    }
    cfg.model = net;
  } else if (model_kind == "linear_gaussian") {
    LinearGaussianSpec lg;
    lg.dim = detail::require(model, "model", "dim").get<Eigen::Index>();
    lg.noise_std = detail::require(model, "model", "noise_std").get<double>();
    if (lg.dim < 1) throw ConfigError("model.dim: must be >= 1");
    if (!(lg.noise_std > 0.0)) throw ConfigError("model.noise_std: must be > 0");
    cfg.model = lg;
  } else {
    throw ConfigError("model.kind: unknown kind \"" + model_kind + "\"");
  }

  if (root.contains("prior")) {
    const json& prior = root["prior"];
    detail::check_keys(prior, "prior", {"sigma"});
    cfg.prior.sigma = detail::get_or<double>(prior, "sigma", 1.0);
    if (!(cfg.prior.sigma > 0.0)) throw ConfigError("prior.sigma: must be > 0");
  }

  const json& kernel = detail::require(root, "config", "kernel");
  detail::check_keys(kernel, "kernel", {"kind", "step_size", "leapfrog_steps"});
  const std::string kernel_kind = detail::require(kernel, "kernel", "kind").get<std::string>();
  const double step_size = detail::require(kernel, "kernel", "step_size").get<double>();
  try {
    if (kernel_kind == "hmc") {
      cfg.kernel = KernelConfig::hmc(step_size, detail::get_or<int>(kernel, "leapfrog_steps", 1));
    } else if (kernel_kind == "langevin") {
      const int steps = detail::get_or<int>(kernel, "leapfrog_steps", 1);
      cfg.kernel = KernelConfig{step_size, steps, KernelKind::kLangevin};
      KernelConfig::validate(cfg.kernel);
    } else {
      throw ConfigError("kernel.kind: unknown kind \"" + kernel_kind + "\"");
    }
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("kernel: ") + err.what());
  }

  const json& sched = detail::require(root, "config", "schedule");
  detail::check_keys(sched, "schedule",
                     {"kind", "initial_batch", "increment", "redraw_constant", "beta0",
                      "entropy_step"});
  const std::string sched_kind = detail::require(sched, "schedule", "kind").get<std::string>();
  if (sched_kind == "constant")
    cfg.schedule.kind = ScheduleKind::kConstant;
  else if (sched_kind == "full_batch")
    cfg.schedule.kind = ScheduleKind::kFullBatch;
  else if (sched_kind == "ctr")
    cfg.schedule.kind = ScheduleKind::kCtr;
  else if (sched_kind == "linear")
    cfg.schedule.kind = ScheduleKind::kLinear;
  else if (sched_kind == "automated")
    cfg.schedule.kind = ScheduleKind::kAutomated;
  else if (sched_kind == "sda")
    cfg.schedule.kind = ScheduleKind::kSda;
  else
    throw ConfigError("schedule.kind: unknown kind \"" + sched_kind + "\"");
  if (cfg.schedule.kind != ScheduleKind::kFullBatch) {
    cfg.schedule.initial_batch =
        detail::require(sched, "schedule", "initial_batch").get<Eigen::Index>();
    if (cfg.schedule.initial_batch < 1) throw ConfigError("schedule.initial_batch: must be >= 1");
  } else {
    cfg.schedule.initial_batch = detail::get_or<Eigen::Index>(sched, "initial_batch", 0);
  }
  cfg.schedule.increment = detail::get_or<Eigen::Index>(sched, "increment", 0);
  if (cfg.schedule.increment < 0) throw ConfigError("schedule.increment: must be >= 1");
  cfg.schedule.redraw_constant = detail::get_or<bool>(sched, "redraw_constant", false);
  if (cfg.schedule.redraw_constant && cfg.schedule.kind != ScheduleKind::kConstant)
    throw ConfigError("schedule.redraw_constant: only valid for the constant schedule");
  cfg.schedule.beta0 = detail::get_or<double>(sched, "beta0", 0.1);
  if (!(cfg.schedule.beta0 > 0.0 && cfg.schedule.beta0 <= 1.0))
    throw ConfigError("schedule.beta0: must be in (0, 1]");
  cfg.schedule.entropy_step = detail::get_or<double>(sched, "entropy_step", 1.0);

  cfg.particles = detail::get_or<int>(root, "particles", 128);
  if (cfg.particles < 2) throw ConfigError("particles: must be >= 2");
  cfg.iterations = detail::require(root, "config", "iterations").get<int>();
  if (cfg.iterations < 1) throw ConfigError("iterations: must be >= 1");
  cfg.seed = detail::require(root, "config", "seed").get<std::uint64_t>();
  cfg.eval_every = detail::get_or<int>(root, "eval_every", 10);
  if (cfg.eval_every < 1) throw ConfigError("eval_every: must be >= 1");
  cfg.output = detail::get_or<std::string>(root, "output", "");
  cfg.threads = detail::get_or<int>(root, "threads", 1);
  if (cfg.threads < 1) throw ConfigError("threads: must be >= 1");
  cfg.resample_fraction = detail::get_or<double>(root, "resample_fraction", 0.5);
  if (!(cfg.resample_fraction >= 0.0 && cfg.resample_fraction <= 1.0))
    throw ConfigError("resample_fraction: must be in [0, 1]");
  return cfg;
}

/// Canonical JSON for the resolved config. Execution-only settings (output
/// path, thread count) are omitted: they must not change the trace.
inline std::string config_to_json(const RunConfig& cfg) {
  using nlohmann::json;
  json root;
  json ds;
  switch (cfg.dataset.kind) {
    case DatasetKind::kIdx:
      ds["kind"] = "idx";
      ds["train_images"] = cfg.dataset.train_images;
      ds["train_labels"] = cfg.dataset.train_labels;
      if (!cfg.dataset.test_images.empty()) {
        ds["test_images"] = cfg.dataset.test_images;
        ds["test_labels"] = cfg.dataset.test_labels;
      }
      break;
    case DatasetKind::kGaussianBlobs:
    case DatasetKind::kTwoMoons:
    case DatasetKind::kLinearGaussian:
      ds["kind"] = cfg.dataset.kind == DatasetKind::kGaussianBlobs ? "gaussian_blobs"
                   : cfg.dataset.kind == DatasetKind::kTwoMoons    ? "two_moons"
                                                                   : "linear_gaussian";
      ds["n"] = cfg.dataset.n;
      ds["noise"] = cfg.dataset.noise;
      if (cfg.dataset.kind == DatasetKind::kLinearGaussian) ds["dim"] = cfg.dataset.dim;
      if (cfg.dataset.test_n > 0) ds["test_n"] = cfg.dataset.test_n;
      break;
  }
  if (cfg.dataset.train_limit > 0) ds["train_limit"] = cfg.dataset.train_limit;
  if (cfg.dataset.test_limit > 0) ds["test_limit"] = cfg.dataset.test_limit;
  root["dataset"] = ds;

  json model;
  if (const auto* net = std::get_if<NetSpec>(&cfg.model)) {
    model["kind"] = "mlp";
    model["layers"] = net->layer_sizes;
    model["activation"] = net->activation == Activation::kRelu ? "relu" : "tanh";
  } else {
    const auto& lg = std::get<LinearGaussianSpec>(cfg.model);
    model["kind"] = "linear_gaussian";
    model["dim"] = lg.dim;
    model["noise_std"] = lg.noise_std;
  }
  root["model"] = model;
  root["prior"] = {{"sigma", cfg.prior.sigma}};
  root["kernel"] = {{"kind", cfg.kernel.kind == KernelKind::kHmc ? "hmc" : "langevin"},
                    {"step_size", cfg.kernel.step_size},
                    {"leapfrog_steps", cfg.kernel.leapfrog_steps}};
  json sched;
  switch (cfg.schedule.kind) {
    case ScheduleKind::kConstant: sched["kind"] = "constant"; break;
    case ScheduleKind::kFullBatch: sched["kind"] = "full_batch"; break;
    case ScheduleKind::kCtr: sched["kind"] = "ctr"; break;
    case ScheduleKind::kLinear: sched["kind"] = "linear"; break;
    case ScheduleKind::kAutomated: sched["kind"] = "automated"; break;
    case ScheduleKind::kSda: sched["kind"] = "sda"; break;
  }
  if (cfg.schedule.initial_batch > 0) sched["initial_batch"] = cfg.schedule.initial_batch;
  if (cfg.schedule.increment > 0) sched["increment"] = cfg.schedule.increment;
  if (cfg.schedule.redraw_constant) sched["redraw_constant"] = true;
  if (cfg.schedule.kind == ScheduleKind::kSda) {
    sched["beta0"] = cfg.schedule.beta0;
    sched["entropy_step"] = cfg.schedule.entropy_step;
  }
  root["schedule"] = sched;
  root["particles"] = cfg.particles;
  root["iterations"] = cfg.iterations;
  root["seed"] = cfg.seed;
  root["eval_every"] = cfg.eval_every;
  root["resample_fraction"] = cfg.resample_fraction;
  return root.dump();
}

/// Ensemble-averaged predictive metrics over a labelled test set: mean log
/// predictive probability of the true label (higher is better) and argmax
/// accuracy in percent.
inline std::pair<double, double> evaluate_predictive(const ParticleEnsemble& e,
                                                     const NetSpec& spec, const Dataset& test,
                                                     int num_threads = 1) {
  if (test.n() < 1 || !test.is_classification())
    throw std::invalid_argument("evaluate_predictive: empty or unlabelled test set");
  const Eigen::Index count = e.count();
  const Eigen::VectorXd w = normalize(e.log_weights);
  std::vector<Eigen::MatrixXd> probs(static_cast<std::size_t>(count));
  parallel_for(count, num_threads, [&](Eigen::Index j) {
    if (w[j] <= 0.0) return;  // dead particle, contributes nothing
    Eigen::MatrixXd logits = forward_batch(spec, e.thetas.col(j), test.features);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double m = logits.row(i).maxCoeff();
      Eigen::ArrayXd ex = (logits.row(i).array() - m).exp();
      logits.row(i) = (ex / ex.sum()).matrix();
    }
    probs[static_cast<std::size_t>(j)] = std::move(logits);
  });
  Eigen::MatrixXd predictive = Eigen::MatrixXd::Zero(test.n(), spec.layer_sizes.back());
  for (Eigen::Index j = 0; j < count; ++j) {
    if (w[j] > 0.0) predictive += w[j] * probs[static_cast<std::size_t>(j)];
  }
  double log_pred = 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test.n(); ++i) {
    const int y = test.labels[static_cast<std::size_t>(i)];
    log_pred += std::log(std::max(predictive(i, y), 1e-300));
    Eigen::Index argmax = 0;
    predictive.row(i).maxCoeff(&argmax);
    if (argmax == y) ++correct;
  }
  return {log_pred / static_cast<double>(test.n()),
          100.0 * static_cast<double>(correct) / static_cast<double>(test.n())};
}

struct RunSummary {
  double sampler_ms = 0.0;
  double total_ms = 0.0;
  double final_ess = 0.0;
  double test_log_pred = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  bool complete = false;
};

struct RunResult {
  std::vector<IterRecord> records;
  RunSummary summary;
  ParticleEnsemble ensemble;
  std::string trace;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_trace(std::string& out, const RunConfig& cfg,
                        const std::vector<IterRecord>& records, const RunSummary& summary,
                        const std::string& status) {
  std::ostringstream os;
  os << "# dasmc trace v1\n";
  os << "# config " << config_to_json(cfg) << "\n";
  os << "# columns k\tbatch\tbeta\tess\tresampled\tmean_log_target\tsampler_ms\ttest_log_pred\ttest_acc\n";
  for (const IterRecord& r : records) {
    os << r.k << '\t' << r.batch << '\t' << format_double(r.beta) << '\t'
       << format_double(r.ess) << '\t' << (r.resampled ? 1 : 0) << '\t'
       << format_double(r.mean_log_target) << '\t' << format_double(r.sampler_ms) << '\t'
       << format_double(r.test_log_pred) << '\t' << format_double(r.test_accuracy) << '\n';
  }
  os << "# summary iterations=" << records.size()
     << " sampler_ms=" << format_double(summary.sampler_ms)
     << " total_ms=" << format_double(summary.total_ms)
     << " final_ess=" << format_double(summary.final_ess)
     << " test_log_pred=" << format_double(summary.test_log_pred)
     << " test_acc=" << format_double(summary.test_accuracy) << "\n";
  os << "# status " << status << "\n";
  out = os.str();
}

}  // namespace detail

/// Trace text with every wall-time field removed, for byte-level
/// reproducibility comparisons.
inline std::string strip_timing(const std::string& trace) {
  std::istringstream in(trace);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# summary", 0) == 0) {
      std::istringstream fields(line);
      std::string tok;
      bool first = true;
      while (fields >> tok) {
        if (tok.rfind("sampler_ms=", 0) == 0 || tok.rfind("total_ms=", 0) == 0) continue;
        out << (first ? "" : " ") << tok;
        first = false;
      }
      out << '\n';
    } else if (!line.empty() && line[0] != '#') {
      std::istringstream fields(line);
      std::string tok;
      std::vector<std::string> cols;
      while (std::getline(fields, tok, '\t')) cols.push_back(tok);
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i == 6) continue;  // sampler_ms column
        if (i > 0) out << '\t';
        out << cols[i];
      }
      out << '\n';
    } else {
      out << line << '\n';
    }
  }
  return out.str();
}

/// Run the configured experiment end to end and (when cfg.output is set)
/// write the metrics trace. Fatal sampler errors still produce a partial
/// trace flagged incomplete before the exception is rethrown.
inline RunResult run_experiment(const RunConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  const auto run_start = Clock::now();
  const auto elapsed_ms = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  RngStream root(cfg.seed);

  // Data.
  Dataset train;
  Dataset test;
  bool has_test = false;
  if (cfg.dataset.kind == DatasetKind::kIdx) {
    train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
    if (!cfg.dataset.test_images.empty()) {
      test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
      has_test = true;
    }
  } else {
    const SyntheticKind kind = cfg.dataset.kind == DatasetKind::kGaussianBlobs
                                   ? SyntheticKind::kGaussianBlobs
                               : cfg.dataset.kind == DatasetKind::kTwoMoons
                                   ? SyntheticKind::kTwoMoons
                                   : SyntheticKind::kLinearGaussian;
    SyntheticData synth = make_synthetic(kind, cfg.dataset.n + cfg.dataset.test_n,
                                         cfg.dataset.noise, cfg.seed, cfg.dataset.dim);
    if (cfg.dataset.test_n > 0) {
      test = slice(synth.data, cfg.dataset.n, cfg.dataset.n + cfg.dataset.test_n);
      has_test = true;
    }
    train = cfg.dataset.test_n > 0 ? head(synth.data, cfg.dataset.n) : std::move(synth.data);
  }
  {
    RngStream perm_stream = root.fork(rng_tag::kPermutation);
    train = shuffled(train, perm_stream);
  }
  if (cfg.dataset.train_limit > 0 && cfg.dataset.train_limit < train.n())
    train = head(train, cfg.dataset.train_limit);
  if (has_test && cfg.dataset.test_limit > 0 && cfg.dataset.test_limit < test.n())
    test = head(test, cfg.dataset.test_limit);

  const auto* net = std::get_if<NetSpec>(&cfg.model);
  if (net != nullptr) {
    if (!train.is_classification())
      throw ConfigError("model: mlp requires a classification dataset");
    if (train.dim() != net->layer_sizes.front())
      throw ConfigError("model.layers: input size does not match dataset dimension");
    if (train.num_classes > net->layer_sizes.back())
      throw ConfigError("model.layers: output size smaller than the number of classes");
  } else {
    if (train.is_classification())
      throw ConfigError("model: linear_gaussian requires a regression dataset");
    if (train.dim() != std::get<LinearGaussianSpec>(cfg.model).dim)
      throw ConfigError("model.dim: does not match dataset dimension");
  }
  const bool evaluable = has_test && net != nullptr;

  // Schedule.
  ScheduleConfig sched;
  sched.kind = cfg.schedule.kind;
  sched.iterations = cfg.iterations;
  sched.dataset_size = train.n();
  sched.initial_batch = cfg.schedule.initial_batch > 0
                            ? std::min(cfg.schedule.initial_batch, train.n())
                            : train.n();
  sched.increment = cfg.schedule.increment > 0 ? std::min(cfg.schedule.increment, train.n())
                                               : sched.initial_batch;
  validate(sched);

  SdaState sda;
  const bool is_sda = sched.kind == ScheduleKind::kSda;
  if (is_sda) sda = sda_init(sched, cfg.schedule.beta0, cfg.schedule.entropy_step);

  const SmcOptions opts{cfg.threads, cfg.resample_fraction};

  // A fresh constant-scheme batch is gathered per iteration when redraw is on.
  Dataset redraw_batch;
  const auto draw_batch_rows = [&](int k) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(train.n()));
    for (Eigen::Index i = 0; i < train.n(); ++i) order[static_cast<std::size_t>(i)] = i;
    RngStream stream = root.fork(rng_tag::kRedraw, static_cast<std::uint64_t>(k));
    for (Eigen::Index i = 0; i < sched.initial_batch; ++i) {
      const auto j = i + static_cast<Eigen::Index>(
                             stream.uniform_below(static_cast<std::uint64_t>(train.n() - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    order.resize(static_cast<std::size_t>(sched.initial_batch));
    return order;
  };

  const auto context_for = [&](int k) {
    TargetContext ctx;
    ctx.prior = cfg.prior;
    ctx.model = cfg.model;
    if (is_sda) {
      ctx.data = &train;
      ctx.window = sda.window;
      ctx.mode = TargetMode::kSda;
      ctx.beta = sda.beta;
    } else if (cfg.schedule.redraw_constant) {
      redraw_batch = gather(train, draw_batch_rows(k));
      ctx.data = &redraw_batch;
      ctx.window = SubsetWindow{0, sched.initial_batch, train.n()};
      ctx.mode = TargetMode::kScaled;
    } else {
      ctx.data = &train;
      ctx.window = SubsetWindow{0, batch_size(sched, k), train.n()};
      ctx.mode = TargetMode::kScaled;
    }
    return ctx;
  };

  RunResult result;
  result.records.reserve(static_cast<std::size_t>(cfg.iterations));
  double sampler_total_ms = 0.0;

  const auto finalize = [&](const std::string& status) {
    result.summary.total_ms = elapsed_ms(run_start, Clock::now());
    result.summary.sampler_ms = sampler_total_ms;
    detail::write_trace(result.trace, cfg, result.records, result.summary, status);
    if (!cfg.output.empty()) {
      std::ofstream out(cfg.output, std::ios::binary);
      if (!out) throw ConfigError("cannot open output file: " + cfg.output);
      out << result.trace;
    }
  };

  try {
    const TargetContext ctx0 = context_for(0);
    result.ensemble = init_ensemble(cfg.particles, ctx0, root, cfg.threads);

    for (int k = 0; k < cfg.iterations; ++k) {
      const auto iter_start = Clock::now();
      const TargetContext ctx = context_for(k);
      auto [next, record] = smc_step(result.ensemble, make_target(ctx), cfg.kernel, root, opts);
      result.ensemble = std::move(next);
      record.batch = ctx.window.block_end;
      record.beta = is_sda ? ctx.beta : 1.0;
      if (is_sda) sda = sda_advance(sched, sda, result.ensemble, train, cfg.model, cfg.threads);
      record.sampler_ms = elapsed_ms(iter_start, Clock::now());
      sampler_total_ms += record.sampler_ms;

      if (evaluable && ((k + 1) % cfg.eval_every == 0 || k + 1 == cfg.iterations)) {
        const auto [log_pred, acc] =
            evaluate_predictive(result.ensemble, *net, test, cfg.threads);
        record.test_log_pred = log_pred;
        record.test_accuracy = acc;
        record.evaluated = true;
      }
      result.records.push_back(record);
    }
    result.summary.final_ess = ess(normalize(result.ensemble.log_weights));
    if (!result.records.empty() && result.records.back().evaluated) {
      result.summary.test_log_pred = result.records.back().test_log_pred;
      result.summary.test_accuracy = result.records.back().test_accuracy;
    }
    result.summary.complete = true;
    finalize("complete");
  } catch (const SamplerError& err) {
    finalize(std::string("incomplete: ") + err.what());
    throw;
  }
  return result;
}

}  // namespace dasmc

#endif  // DASMC_RUNNER_HPP
