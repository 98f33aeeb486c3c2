#include <gtest/gtest.h>

#include <sstream>

#include "das/training.hpp"

using namespace das;

namespace {

// Counts correctly ordered (positive, negative) pairs, ties as one half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y, int positive) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != positive || y[j] == positive) continue;
      pairs += 1.0;
      good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return good / pairs;
}

double counting_balanced_accuracy(const std::vector<int>& p, const std::vector<int>& y, int K) {
  double total = 0.0;
  int present = 0;
  for (int c = 0; c < K; ++c) {
    int n = 0, hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != c) continue;
      ++n;
      hit += p[i] == c;
    }
    if (n == 0) continue;
    total += static_cast<double>(hit) / n;
    ++present;
  }
  return total / present;
}

Dataset tiny_dataset() {
  SynthSpec s;
  s.num_items = 60;
  s.height = 8;
  s.width = 8;
  return generate(s);
}

RunConfig tiny_config() {
  RunConfig c;
  c.max_epochs = 3;
  c.seeds = {0, 1};
  c.embed_dim = 8;
  c.mlp_hidden = 8;
  c.sampler_hidden = 4;
  c.temp_hidden = 4;
  c.heads = 2;
  c.lr = 1e-3;
  return c;
}

}  // namespace

TEST(BalancedAccuracy, Examples) {
  const std::vector<int> y{0, 1, 2, 2};
  EXPECT_EQ(balanced_accuracy(y, y, 3), 1.0);
  EXPECT_EQ(balanced_accuracy(std::vector<int>{0, 0, 1, 0}, std::vector<int>{0, 0, 1, 1}, 2), 0.75);
  // Class 2 is absent from the truth and does not count.
  EXPECT_EQ(balanced_accuracy(std::vector<int>{0, 2}, std::vector<int>{0, 1}, 3), 0.5);
  EXPECT_THROW(balanced_accuracy(std::vector<int>{}, std::vector<int>{}, 3), UsageError);
}

TEST(BalancedAccuracy, RandomPredictionsGiveChance) {
  RandomStream rs(1);
  std::vector<int> p, y;
  for (int i = 0; i < 10000; ++i) {
    p.push_back(static_cast<int>(rs.next_below(5)));
    y.push_back(static_cast<int>(rs.next_below(5)));
  }
  EXPECT_NEAR(balanced_accuracy(p, y, 5), 0.2, 0.02);
}

TEST(Auc, Examples) {
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(binary_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, y, 1), 0.75);
  EXPECT_DOUBLE_EQ(binary_auc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, y, 1), 1.0);
  EXPECT_DOUBLE_EQ(binary_auc(std::vector<double>{0.4, 0.3, 0.2, 0.1}, y, 1), 0.0);
  EXPECT_DOUBLE_EQ(binary_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y, 1), 0.5);
  const Tensor scores(Shape{4, 2}, std::vector<double>{0.9, 0.1, 0.6, 0.4, 0.65, 0.35, 0.2, 0.8});
  EXPECT_DOUBLE_EQ(macro_auc(scores, y), 0.75);
  EXPECT_THROW(macro_auc(Tensor(Shape{2, 2}), std::vector<int>{1, 1}), UsageError);
}

TEST(Metrics, MatchBruteForceOracles) {
  RandomStream rs(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t N = 2 + rs.next_below(49);
    const std::size_t K = 2 + rs.next_below(4);
    std::vector<int> y(N), p(N);
    Tensor scores(Shape{N, K});
    for (std::size_t i = 0; i < N; ++i) {
      y[i] = static_cast<int>(rs.next_below(K));
      p[i] = static_cast<int>(rs.next_below(K));
      // Coarse scores so ties occur.
      for (std::size_t c = 0; c < K; ++c) scores.at(i, c) = static_cast<double>(rs.next_below(6)) / 5.0;
    }
    EXPECT_NEAR(balanced_accuracy(p, y, K), counting_balanced_accuracy(p, y, static_cast<int>(K)), 1e-10);
    double total = 0.0;
    int used = 0;
    for (std::size_t c = 0; c < K; ++c) {
      const auto n = std::count(y.begin(), y.end(), static_cast<int>(c));
      if (n == 0 || n == static_cast<long>(N)) continue;
      std::vector<double> col(N);
      for (std::size_t i = 0; i < N; ++i) col[i] = scores.at(i, c);
      total += pairwise_auc(col, y, static_cast<int>(c));
      ++used;
    }
    if (used == 0) {
      EXPECT_THROW(macro_auc(scores, y), UsageError);
    } else {
      EXPECT_NEAR(macro_auc(scores, y), total / used, 1e-10);
    }
  }
}

TEST(EarlyStopping, PatienceExample) {
  EarlyStopping stop(2);
  const std::vector<double> losses{1.0, 0.9, 0.95, 0.97};
  std::size_t stopped_at = 0;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    stop.update(losses[e], e + 1);
    if (stop.should_stop()) {
      stopped_at = e + 1;
      break;
    }
  }
  EXPECT_EQ(stopped_at, 4u);
  EXPECT_EQ(stop.best_epoch(), 2u);
  EXPECT_EQ(stop.best_loss(), 0.9);
}

TEST(RunConfig, KFromSampleRatio) {
  RunConfig c;
  EXPECT_EQ(c.k_for(StrategyKind::das, 16), 8u);
  EXPECT_EQ(c.k_for(StrategyKind::full, 16), 16u);
  c.sample_ratio = 0.01;
  EXPECT_EQ(c.k_for(StrategyKind::random, 16), 1u);
  c.sample_ratio = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
  c.sample_ratio = 1.5;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(RunConfig, StrictJson) {
  RunConfig c = tiny_config();
  c.dataset = "data.bin";
  EXPECT_EQ(to_json(run_config_from_json(to_json(c))), to_json(c));
  try {
    run_config_from_json(nlohmann::json{{"lrr", 0.1}});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("lrr"), std::string::npos);
  }
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"lr", "fast"}}), UsageError);
}

TEST(MetricsCsv, HeaderAndRows) {
  std::ostringstream out;
  write_metrics_csv(out, {{"das", 2, "val", 5, 0.5, 0.25, 0.75, 0.4, 0.0}});
  EXPECT_EQ(out.str(),
            "strategy,seed,split,epoch,loss,balanced_accuracy,macro_auc,signal_hit_rate,wall_time_ms\n"
            "das,2,val,5,0.5,0.25,0.75,0.4,0\n");
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const Dataset ds = tiny_dataset();
  const FeatureCache cache = compute_feature_cache(ds);
  RunConfig cfg = tiny_config();
  cfg.lr = 0.0;
  for (StrategyKind s : {StrategyKind::das, StrategyKind::dps, StrategyKind::uniform}) {
    const TrainResult r = train_run(cfg, s, ds, cache, 0);
    const Model fresh(cfg, s, ds.spec, 0);
    for (const auto& [name, e] : r.params)
      if (e.trainable) {
        EXPECT_EQ(e.value, fresh.params().at(name).value) << name;
      }
  }
}

TEST(Train, DeterministicAndRestoresBestEpoch) {
  const Dataset ds = tiny_dataset();
  const FeatureCache cache = compute_feature_cache(ds);
  RunConfig cfg = tiny_config();
  cfg.max_epochs = 6;
  cfg.patience = 2;
  const TrainResult a = train_run(cfg, StrategyKind::das, ds, cache, 3);
  const TrainResult b = train_run(cfg, StrategyKind::das, ds, cache, 3);
  EXPECT_TRUE(a.params == b.params);
  std::ostringstream ca, cb;
  write_metrics_csv(ca, a.records);
  write_metrics_csv(cb, b.records);
  EXPECT_EQ(ca.str(), cb.str());

  double best = INFINITY;
  std::size_t best_epoch = 0;
  for (const auto& r : a.records)
    if (r.split == "val" && r.loss < best) {
      best = r.loss;
      best_epoch = r.epoch;
    }
  EXPECT_EQ(a.best_epoch, best_epoch);
  EXPECT_EQ(a.records.back().split, "test");
  EXPECT_EQ(a.records.size(), 2 * a.epochs_run + 1);

  // The returned parameters reproduce the best validation loss.
  Model m(cfg, StrategyKind::das, ds.spec, 3);
  m.set_params(a.params);
  const EvalResult val =
      evaluate(m, ds, cache, ds.split_indices(Split::val), eval_stream(3, Split::val), cfg.batch_size, false);
  EXPECT_DOUBLE_EQ(val.loss, best);
}

TEST(Train, CheckpointRebuildsModel) {
  const Dataset ds = tiny_dataset();
  const FeatureCache cache = compute_feature_cache(ds);
  const RunConfig cfg = tiny_config();
  const TrainResult r = train_run(cfg, StrategyKind::das, ds, cache, 1);
  const Checkpoint ck = decode_checkpoint(encode_checkpoint(r.params, checkpoint_meta(cfg, StrategyKind::das, 1, ds.spec, r.best_epoch)));
  Model m = model_from_checkpoint(ck);
  const EvalResult test =
      evaluate(m, ds, cache, ds.split_indices(Split::test), eval_stream(1, Split::test), cfg.batch_size, false);
  EXPECT_EQ(test.loss, r.test.loss);
  EXPECT_EQ(test.predictions, r.test.predictions);
}

TEST(Compare, TableLayout) {
  const Dataset ds = tiny_dataset();
  RunConfig cfg = tiny_config();
  cfg.max_epochs = 2;
  const ComparisonResult res = compare(cfg, ds);
  ASSERT_EQ(res.rows.size(), 3u * 6u);
  for (const char* metric : kComparisonMetrics) {
    int best = 0;
    for (const auto& row : res.rows) {
      if (row.metric != metric) continue;
      if (row.strategy == "full") {
        EXPECT_FALSE(row.is_best);
      }
      if (row.strategy == "adps") {
        EXPECT_FALSE(row.implemented);
      }
      best += row.is_best;
    }
    EXPECT_GE(best, 1);
  }
  // Every run is scored on the same test items.
  std::vector<int> truth;
  for (std::size_t i : ds.split_indices(Split::test)) truth.push_back(ds.items[i].label);
  for (const auto& run : res.runs) EXPECT_EQ(run.test.predictions.size(), truth.size());

  std::ostringstream csv;
  write_comparison_csv(csv, res, ds.spec);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "strategy,metric,mean,std,is_best");
  int rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    ++rows;
  }
  EXPECT_EQ(rows, 18);
}

TEST(Compare, NoiseLevelNoteOnlyWhenChanged) {
  SynthSpec s;
  ComparisonResult empty;
  std::ostringstream a, b;
  write_comparison_csv(a, empty, s);
  s.noise_std = 0.15;
  write_comparison_csv(b, empty, s);
  EXPECT_EQ(a.str(), "strategy,metric,mean,std,is_best\n");
  EXPECT_EQ(b.str(), "# noise_std=0.15\nstrategy,metric,mean,std,is_best\n");
}

TEST(Compare, ThreadCountDoesNotChangeResults) {
  const Dataset ds = tiny_dataset();
  RunConfig cfg = tiny_config();
  cfg.max_epochs = 1;
  cfg.strategies = {"random", "das"};
  setenv("DAS_NUM_THREADS", "1", 1);
  const ComparisonResult one = compare(cfg, ds);
  setenv("DAS_NUM_THREADS", "4", 1);
  const ComparisonResult four = compare(cfg, ds);
  unsetenv("DAS_NUM_THREADS");
  std::ostringstream a, b;
  write_comparison_csv(a, one, ds.spec);
  write_comparison_csv(b, four, ds.spec);
  EXPECT_EQ(a.str(), b.str());
}
