#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "das/baselines.hpp"
#include "das/classifier.hpp"
#include "das/metrics.hpp"
#include "das/param_store.hpp"
#include "das/sampler.hpp"
#include "das/synth.hpp"

namespace das {

struct RunConfig {
  std::string strategy = "das";
  std::vector<std::string> strategies{"full", "random", "uniform", "dps", "das"};
  double sample_ratio = 0.5;
  double lr = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double tau0 = 1.0;
  std::size_t heads = 4;
  std::size_t sampler_hidden = 16;
  std::size_t temp_hidden = 16;
  std::size_t embed_dim = 32;
  std::size_t mlp_hidden = 32;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string dataset;
  std::string output_dir = "out";
  bool deterministic_eval = false;
  bool record_wall_time = false;

  void validate() const {
    parse_strategy(strategy);
    for (const auto& s : strategies) parse_strategy(s);
    if (!(sample_ratio > 0.0 && sample_ratio <= 1.0)) throw UsageError("sample_ratio must be in (0, 1]");
    if (!(lr >= 0.0)) throw UsageError("lr must be >= 0");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
    if (!(tau0 > 0.0)) throw UsageError("tau0 must be positive");
    if (heads < 1) throw UsageError("heads must be >= 1");
    if (seeds.empty()) throw UsageError("seeds must not be empty");
  }

  // k = max(1, round(sample_ratio * T_max)); the full strategy keeps every frame.
  std::size_t k_for(StrategyKind s, std::size_t t_max) const {
    if (s == StrategyKind::full) return t_max;
    const auto k = static_cast<std::size_t>(std::llround(sample_ratio * static_cast<double>(t_max)));
    return std::clamp<std::size_t>(k, 1, t_max);
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"strategy", c.strategy},
          {"strategies", c.strategies},
          {"sample_ratio", c.sample_ratio},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"tau0", c.tau0},
          {"heads", c.heads},
          {"sampler_hidden", c.sampler_hidden},
          {"temp_hidden", c.temp_hidden},
          {"embed_dim", c.embed_dim},
          {"mlp_hidden", c.mlp_hidden},
          {"seeds", c.seeds},
          {"dataset", c.dataset},
          {"output_dir", c.output_dir},
          {"deterministic_eval", c.deterministic_eval},
          {"record_wall_time", c.record_wall_time}};
}

// Applies the keys of `j` onto `c`; any key that is not a RunConfig field is an error.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "strategy") c.strategy = v.get<std::string>();
      else if (key == "strategies") c.strategies = v.get<std::vector<std::string>>();
      else if (key == "sample_ratio") c.sample_ratio = v.get<double>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = v.get<std::size_t>();
      else if (key == "patience") c.patience = v.get<std::size_t>();
      else if (key == "tau0") c.tau0 = v.get<double>();
      else if (key == "heads") c.heads = v.get<std::size_t>();
      else if (key == "sampler_hidden") c.sampler_hidden = v.get<std::size_t>();
      else if (key == "temp_hidden") c.temp_hidden = v.get<std::size_t>();
      else if (key == "embed_dim") c.embed_dim = v.get<std::size_t>();
      else if (key == "mlp_hidden") c.mlp_hidden = v.get<std::size_t>();
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "dataset") c.dataset = v.get<std::string>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "deterministic_eval") c.deterministic_eval = v.get<bool>();
      else if (key == "record_wall_time") c.record_wall_time = v.get<bool>();
      else throw UsageError("unknown config key: \"" + key + "\"");
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("bad value for config key \"" + key + "\": " + e.what());
    }
  }
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  apply_json(c, j);
  c.validate();
  return c;
}

struct MetricsRecord {
  std::string strategy;
  std::uint64_t seed = 0;
  std::string split;
  std::size_t epoch = 0;
  double loss = 0.0;
  double balanced_accuracy = 0.0;
  double macro_auc = 0.0;
  double signal_hit_rate = 0.0;
  double wall_time_ms = 0.0;
};

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline constexpr const char* kMetricsCsvHeader =
    "strategy,seed,split,epoch,loss,balanced_accuracy,macro_auc,signal_hit_rate,wall_time_ms";

inline std::string to_csv_row(const MetricsRecord& r) {
  return r.strategy + "," + std::to_string(r.seed) + "," + r.split + "," + std::to_string(r.epoch) + "," +
         format_real(r.loss) + "," + format_real(r.balanced_accuracy) + "," + format_real(r.macro_auc) + "," +
         format_real(r.signal_hit_rate) + "," + format_real(r.wall_time_ms);
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : records) out << to_csv_row(r) << '\n';
}

// Stops once `patience` consecutive epochs fail to improve the best validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `loss` is a new best.
  bool update(double loss, std::size_t epoch) {
    if (loss < best_loss_) {
      best_loss_ = loss;
      best_epoch_ = epoch;
      bad_epochs_ = 0;
      return true;
    }
    ++bad_epochs_;
    return false;
  }

  bool should_stop() const { return bad_epochs_ >= patience_ && best_epoch_ > 0; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t bad_epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

// Unstandardized descriptors per dataset item, [T_max, d] each.
using FeatureCache = std::vector<Tensor>;

inline FeatureCache compute_feature_cache(const Dataset& ds) {
  FeatureCache cache;
  cache.reserve(ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const Tensor raw = raw_features(ds.batch({i}));
    cache.push_back(raw.reshaped(Shape{ds.frames(), raw.dim(2)}));
  }
  return cache;
}

// Sampler (if any) plus downstream classifier for one strategy.
class Model {
 public:
  Model(const RunConfig& cfg, StrategyKind strategy, const SynthSpec& data, std::uint64_t seed)
      : strategy_(strategy), t_max_(data.t_max), tau0_(cfg.tau0) {
    sampler_cfg_.heads = cfg.heads;
    sampler_cfg_.k = cfg.k_for(strategy, data.t_max);
    sampler_cfg_.hidden = cfg.sampler_hidden;
    sampler_cfg_.temp_hidden = cfg.temp_hidden;
    sampler_cfg_.tau0 = cfg.tau0;
    clf_cfg_.channels = data.channels;
    clf_cfg_.embed_dim = cfg.embed_dim;
    clf_cfg_.mlp_hidden = cfg.mlp_hidden;
    clf_cfg_.num_classes = data.num_classes;

    RandomStream init = RandomStream::derive(seed, "init");
    if (strategy == StrategyKind::das) init_sampler_params(params_, sampler_cfg_, init);
    if (strategy == StrategyKind::dps) init_dps_params(params_, sampler_cfg_.k, data.t_max);
    init_classifier_params(params_, clf_cfg_, init);
    if (strategy == StrategyKind::das) {
      params_.add("features.mean", Tensor(Shape{kFeatureDim}), false);
      params_.add("features.std", Tensor(Shape{kFeatureDim}, 1.0), false);
    }
  }

  StrategyKind strategy() const { return strategy_; }
  std::size_t k() const { return sampler_cfg_.k; }
  std::size_t num_classes() const { return clf_cfg_.num_classes; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  void set_params(ParameterStore p) {
    params_ = std::move(p);
    if (params_.contains("features.mean")) {
      normalizer_.set(FeatureStats{params_.at("features.mean").value.storage(), params_.at("features.std").value.storage()});
    }
  }

  struct Output {
    Var loss;
    Tensor logits;
    SamplingMatrix matrix;
  };

  // Builds the graph for one batch. In train mode the feature statistics come from
  // the batch and update the running estimate; in eval mode the running estimate is used.
  Output forward(ParamBinding& binding, const Dataset& ds, const FeatureCache& cache,
                 const std::vector<std::size_t>& idx, RandomStream& stream, SampleMode mode, bool deterministic) {
    const FrameSequence seq = ds.batch(idx);
    const std::size_t B = idx.size();
    Output out;
    switch (strategy_) {
      case StrategyKind::full: out.matrix = full_sampling(B, t_max_); break;
      case StrategyKind::random: out.matrix = random_sampling(B, t_max_, k(), stream); break;
      case StrategyKind::uniform: out.matrix = uniform_sampling(B, t_max_, k()); break;
      case StrategyKind::dps:
        out.matrix = dps_fixed_sampler(binding, B, tau0_, stream, mode, deterministic);
        break;
      case StrategyKind::das: {
        const FeatureTensor f = batch_features(cache, idx, seq, mode);
        const SamplerLogits l = sampler_logits(constant(f.data), binding, sampler_cfg_);
        out.matrix = gumbel_softmax_sample(l.logits, l.temperature, stream, mode, deterministic);
        break;
      }
    }
    Var frames = apply_sampling(out.matrix, seq);
    Var logits = classify(attention_aggregate(frame_embed(frames, binding), binding), binding);
    out.logits = logits.value();
    out.loss = cross_entropy(logits, ds.labels(idx));
    return out;
  }

 private:
  FeatureTensor batch_features(const FeatureCache& cache, const std::vector<std::size_t>& idx,
                               const FrameSequence& seq, SampleMode mode) {
    const std::size_t T = seq.frames();
    Tensor raw(Shape{idx.size(), T, kFeatureDim});
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const Tensor& r = cache.at(idx[b]);
      std::copy(r.data().begin(), r.data().end(), raw.data().begin() + b * T * kFeatureDim);
    }
    if (mode == SampleMode::train) {
      const FeatureStats stats = compute_feature_stats(raw, seq.valid_len);
      normalizer_.update(stats);
      params_.at("features.mean").value = Tensor::vector(normalizer_.stats().mean);
      params_.at("features.std").value = Tensor::vector(normalizer_.stats().stddev);
      return standardize(raw, stats);
    }
    if (!normalizer_.initialized()) {
      normalizer_.set(FeatureStats{params_.at("features.mean").value.storage(), params_.at("features.std").value.storage()});
    }
    return standardize(raw, normalizer_.stats());
  }

  StrategyKind strategy_;
  std::size_t t_max_;
  double tau0_;
  SamplerConfig sampler_cfg_;
  ClassifierConfig clf_cfg_;
  ParameterStore params_;
  FeatureNormalizer normalizer_;
};

struct EvalResult {
  double loss = 0.0;
  double balanced_accuracy = 0.0;
  double macro_auc = 0.0;
  double signal_hit_rate = 0.0;
  std::vector<int> predictions;
};

using BatchObserver = std::function<void(const std::vector<std::size_t>& idx, const SamplingMatrix& m)>;

// macro_auc, or NaN when no class has both positives and negatives.
inline double safe_macro_auc(const Tensor& scores, std::span<const int> truth) {
  try {
    return macro_auc(scores, truth);
  } catch (const UsageError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline EvalResult evaluate(Model& model, const Dataset& ds, const FeatureCache& cache,
                           const std::vector<std::size_t>& idx, RandomStream stream, std::size_t batch_size,
                           bool deterministic, const BatchObserver& observe = {}) {
  EvalResult r;
  const std::size_t K = model.num_classes();
  Tensor probs(Shape{idx.size(), K});
  std::vector<int> truth;
  double hits = 0.0;
  double picks = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::vector<std::size_t> batch(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), start + batch_size)));
    ParamBinding binding(model.params());
    const Model::Output out = model.forward(binding, ds, cache, batch, stream, SampleMode::eval, deterministic);
    r.loss += out.loss.value()[0] * static_cast<double>(batch.size());
    const auto selected = out.matrix.selected();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const DatasetItem& it = ds.items[batch[b]];
      truth.push_back(it.label);
      double mx = out.logits.at(b, 0);
      int best = 0;
      for (std::size_t c = 1; c < K; ++c) {
        if (out.logits.at(b, c) > mx) {
          mx = out.logits.at(b, c);
          best = static_cast<int>(c);
        }
      }
      r.predictions.push_back(best);
      double z = 0.0;
      for (std::size_t c = 0; c < K; ++c) z += std::exp(out.logits.at(b, c) - mx);
      for (std::size_t c = 0; c < K; ++c) probs.at(start + b, c) = std::exp(out.logits.at(b, c) - mx) / z;
      for (std::size_t t : selected[b]) {
        picks += 1.0;
        if (std::find(it.signal_positions.begin(), it.signal_positions.end(), t) != it.signal_positions.end()) hits += 1.0;
      }
    }
    if (observe) observe(batch, out.matrix);
  }
  r.loss /= static_cast<double>(idx.size());
  r.balanced_accuracy = balanced_accuracy(r.predictions, truth, K);
  r.macro_auc = safe_macro_auc(probs, truth);
  r.signal_hit_rate = picks > 0.0 ? hits / picks : 0.0;
  return r;
}

inline RandomStream eval_stream(std::uint64_t seed, Split split) {
  return RandomStream::derive(seed, "eval/" + to_string(split));
}

struct TrainResult {
  ParameterStore params;
  std::vector<MetricsRecord> records;
  EvalResult test;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

inline nlohmann::json checkpoint_meta(const RunConfig& cfg, StrategyKind strategy, std::uint64_t seed,
                                      const SynthSpec& data, std::size_t best_epoch) {
  RunConfig c = cfg;
  c.strategy = to_string(strategy);
  return {{"strategy", to_string(strategy)},
          {"seed", seed},
          {"best_epoch", best_epoch},
          {"config", to_json(c)},
          {"data_spec", to_json(data)}};
}

// One training run with early stopping on validation loss; the returned parameters are
// those of the best validation epoch, and the last record is the test-split evaluation.
inline TrainResult train_run(const RunConfig& cfg, StrategyKind strategy, const Dataset& ds, const FeatureCache& cache,
                             std::uint64_t seed) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto elapsed_ms = [&] {
    return cfg.record_wall_time ? std::chrono::duration<double, std::milli>(Clock::now() - t0).count() : 0.0;
  };

  Model model(cfg, strategy, ds.spec, seed);
  std::vector<std::size_t> train_idx = ds.split_indices(Split::train);
  const std::vector<std::size_t> val_idx = ds.split_indices(Split::val);
  const std::vector<std::size_t> test_idx = ds.split_indices(Split::test);
  if (train_idx.empty() || val_idx.empty() || test_idx.empty()) throw UsageError("dataset has an empty split");

  const std::string name = to_string(strategy);
  TrainResult result;
  EarlyStopping stopper(cfg.patience);
  ParameterStore best = model.params();
  const RandomStream shuffle_root = RandomStream::derive(seed, "shuffle");
  const RandomStream noise_root = RandomStream::derive(seed, "train-noise");

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    RandomStream shuffle = shuffle_root.derive(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = train_idx.size(); i > 1; --i) std::swap(train_idx[i - 1], train_idx[shuffle.next_below(i)]);
    RandomStream noise = noise_root.derive(static_cast<std::uint64_t>(epoch));

    double train_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> batch(
          train_idx.begin() + static_cast<std::ptrdiff_t>(start),
          train_idx.begin() + static_cast<std::ptrdiff_t>(std::min(train_idx.size(), start + cfg.batch_size)));
      ParamBinding binding(model.params());
      const Model::Output out = model.forward(binding, ds, cache, batch, noise, SampleMode::train, false);
      train_loss += out.loss.value()[0] * static_cast<double>(batch.size());
      backward(out.loss);
      binding.accumulate_grads();
      adam_step(model.params(), cfg.lr, 0.9, 0.999, 1e-8);
    }
    train_loss /= static_cast<double>(train_idx.size());

    const EvalResult val =
        evaluate(model, ds, cache, val_idx, eval_stream(seed, Split::val), cfg.batch_size, cfg.deterministic_eval);
    result.records.push_back({name, seed, "train", epoch, train_loss, std::numeric_limits<double>::quiet_NaN(),
                              std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                              elapsed_ms()});
    result.records.push_back(
        {name, seed, "val", epoch, val.loss, val.balanced_accuracy, val.macro_auc, val.signal_hit_rate, elapsed_ms()});
    result.epochs_run = epoch;
    if (stopper.update(val.loss, epoch)) best = model.params();
    if (stopper.should_stop()) break;
  }

  model.set_params(best);
  result.best_epoch = stopper.best_epoch();
  result.test =
      evaluate(model, ds, cache, test_idx, eval_stream(seed, Split::test), cfg.batch_size, cfg.deterministic_eval);
  result.records.push_back({name, seed, "test", result.best_epoch, result.test.loss, result.test.balanced_accuracy,
                            result.test.macro_auc, result.test.signal_hit_rate, elapsed_ms()});
  result.params = model.params();
  return result;
}

// Rebuilds a model from a checkpoint written by train_run.
inline Model model_from_checkpoint(const Checkpoint& ck) {
  RunConfig cfg;
  apply_json(cfg, ck.meta.at("config"));
  const SynthSpec spec = synth_spec_from_json(ck.meta.at("data_spec"));
  Model model(cfg, parse_strategy(ck.meta.at("strategy").get<std::string>()), spec,
              ck.meta.at("seed").get<std::uint64_t>());
  model.set_params(ck.store);
  return model;
}

struct ComparisonRow {
  std::string strategy;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  bool is_best = false;
  bool implemented = true;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;
  std::vector<MetricsRecord> records;  // every run, every epoch
  std::vector<TrainResult> runs;       // strategy-major, seed-minor
};

inline constexpr std::array<const char*, 3> kComparisonMetrics{"balanced_accuracy", "macro_auc", "signal_hit_rate"};

inline std::size_t worker_count() {
  std::size_t n = 0;
  if (const char* env = std::getenv("DAS_NUM_THREADS")) n = static_cast<std::size_t>(std::strtoull(env, nullptr, 10));
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

inline double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Trains every configured strategy on every seed with the same data and splits.
// Runs are independent and may execute on worker threads; results are ordered.
inline ComparisonResult compare(const RunConfig& cfg, const Dataset& ds) {
  cfg.validate();
  const FeatureCache cache = compute_feature_cache(ds);
  std::vector<StrategyKind> strategies;
  for (const auto& s : cfg.strategies) strategies.push_back(parse_strategy(s));

  struct Job {
    StrategyKind strategy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (StrategyKind s : strategies)
    for (std::uint64_t seed : cfg.seeds) jobs.push_back({s, seed});

  ComparisonResult out;
  out.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        out.runs[j] = train_run(cfg, jobs[j].strategy, ds, cache, jobs[j].seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(worker_count(), jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  for (const auto& run : out.runs) out.records.insert(out.records.end(), run.records.begin(), run.records.end());

  for (const char* metric : kComparisonMetrics) {
    const std::size_t first = out.rows.size();
    for (std::size_t si = 0; si < strategies.size(); ++si) {
      std::vector<double> values;
      for (std::size_t r = 0; r < cfg.seeds.size(); ++r) {
        const EvalResult& t = out.runs[si * cfg.seeds.size() + r].test;
        const std::string m = metric;
        values.push_back(m == "balanced_accuracy" ? t.balanced_accuracy
                                                  : (m == "macro_auc" ? t.macro_auc : t.signal_hit_rate));
      }
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      out.rows.push_back({to_string(strategies[si]), metric, mean, sample_std(values, mean), false, true});
    }
    // Best among subsampling strategies; the full sequence is the reference, not a candidate.
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = first; r < out.rows.size(); ++r)
      if (out.rows[r].strategy != "full" && out.rows[r].mean > best) best = out.rows[r].mean;
    for (std::size_t r = first; r < out.rows.size(); ++r)
      out.rows[r].is_best = out.rows[r].strategy != "full" && out.rows[r].mean == best;
    out.rows.push_back({"adps", metric, 0.0, 0.0, false, false});
  }
  return out;
}

inline constexpr const char* kComparisonCsvHeader = "strategy,metric,mean,std,is_best";
inline constexpr double kDefaultNoiseStd = 0.25;

inline void write_comparison_csv(std::ostream& out, const ComparisonResult& result, const SynthSpec& data) {
  if (data.noise_std != kDefaultNoiseStd) out << "# noise_std=" << format_real(data.noise_std) << '\n';
  out << kComparisonCsvHeader << '\n';
  for (const auto& r : result.rows) {
    out << r.strategy << ',' << r.metric << ',';
    if (r.implemented) {
      out << format_real(r.mean) << ',' << format_real(r.stddev) << ',' << (r.is_best ? 1 : 0) << '\n';
    } else {
      out << "not_implemented,not_implemented,0\n";
    }
  }
}

}  // namespace das
