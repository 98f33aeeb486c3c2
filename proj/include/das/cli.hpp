#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "das/grad_suite.hpp"
#include "das/training.hpp"

namespace das::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFault = 2 };

inline nlohmann::json read_json_file(const std::string& path) {
  const io::Bytes bytes = io::read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("invalid JSON in " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void ensure_parent_dir(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

// Flags shared by train and compare; each one overrides the config file only when given.
struct RunFlags {
  RunConfig defaults;
  std::string config_path;
  RunConfig values;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

  void attach(CLI::App& cmd, bool with_strategies) {
    values = defaults;
    cmd.add_option("--config", config_path, "JSON run config; keys must match RunConfig fields");
    auto bind = [&](CLI::Option* opt, std::function<void(RunConfig&)> apply) { overrides.emplace_back(opt, std::move(apply)); };
    if (with_strategies) {
      bind(cmd.add_option("--strategies", values.strategies, "strategies to compare"),
           [this](RunConfig& c) { c.strategies = values.strategies; });
    } else {
      bind(cmd.add_option("--strategy", values.strategy, "full, random, uniform, dps or das"),
           [this](RunConfig& c) { c.strategy = values.strategy; });
    }
    bind(cmd.add_option("--dataset", values.dataset, "dataset file written by generate"),
         [this](RunConfig& c) { c.dataset = values.dataset; });
    bind(cmd.add_option("--output-dir", values.output_dir, "directory for checkpoints and CSVs"),
         [this](RunConfig& c) { c.output_dir = values.output_dir; });
    bind(cmd.add_option("--sample-ratio", values.sample_ratio, "fraction of T_max kept"),
         [this](RunConfig& c) { c.sample_ratio = values.sample_ratio; });
    bind(cmd.add_option("--lr", values.lr, "Adam learning rate"), [this](RunConfig& c) { c.lr = values.lr; });
    bind(cmd.add_option("--batch-size", values.batch_size, "mini-batch size"),
         [this](RunConfig& c) { c.batch_size = values.batch_size; });
    bind(cmd.add_option("--max-epochs", values.max_epochs, "epoch budget"),
         [this](RunConfig& c) { c.max_epochs = values.max_epochs; });
    bind(cmd.add_option("--patience", values.patience, "early-stopping patience in epochs"),
         [this](RunConfig& c) { c.patience = values.patience; });
    bind(cmd.add_option("--tau0", values.tau0, "base Gumbel-softmax temperature"),
         [this](RunConfig& c) { c.tau0 = values.tau0; });
    bind(cmd.add_option("--heads", values.heads, "sampler attention heads"),
         [this](RunConfig& c) { c.heads = values.heads; });
    bind(cmd.add_option("--sampler-hidden", values.sampler_hidden, "hidden width of the head MLPs"),
         [this](RunConfig& c) { c.sampler_hidden = values.sampler_hidden; });
    bind(cmd.add_option("--temp-hidden", values.temp_hidden, "hidden width of the temperature MLP"),
         [this](RunConfig& c) { c.temp_hidden = values.temp_hidden; });
    bind(cmd.add_option("--embed-dim", values.embed_dim, "frame embedding width"),
         [this](RunConfig& c) { c.embed_dim = values.embed_dim; });
    bind(cmd.add_option("--mlp-hidden", values.mlp_hidden, "classifier MLP hidden width"),
         [this](RunConfig& c) { c.mlp_hidden = values.mlp_hidden; });
    bind(cmd.add_option("--seeds", values.seeds, "run seeds"), [this](RunConfig& c) { c.seeds = values.seeds; });
    bind(cmd.add_flag("--deterministic", values.deterministic_eval, "no Gumbel noise at evaluation"),
         [this](RunConfig& c) { c.deterministic_eval = values.deterministic_eval; });
    bind(cmd.add_flag("--record-wall-time", values.record_wall_time, "fill the wall_time_ms column"),
         [this](RunConfig& c) { c.record_wall_time = values.record_wall_time; });
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path.empty()) apply_json(c, read_json_file(config_path));
    for (const auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply(c);
    c.validate();
    if (c.dataset.empty()) throw UsageError("no dataset given (config key \"dataset\" or --dataset)");
    return c;
  }
};

inline void check_compatible(const SynthSpec& model_spec, const SynthSpec& data_spec) {
  if (model_spec.t_max != data_spec.t_max || model_spec.channels != data_spec.channels ||
      model_spec.height != data_spec.height || model_spec.width != data_spec.width ||
      model_spec.num_classes != data_spec.num_classes) {
    throw FormatError("dataset shape does not match the checkpoint's training data");
  }
}

inline int cmd_generate(const std::string& spec_path, const std::string& out_path, std::ostream& out) {
  const SynthSpec spec = spec_path.empty() ? SynthSpec{} : [&] {
    try {
      return synth_spec_from_json(read_json_file(spec_path));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("bad synth spec: ") + e.what());
    }
  }();
  spec.validate();
  const Dataset ds = generate(spec);
  ensure_parent_dir(out_path);
  write_dataset(ds, out_path);
  out << "wrote " << ds.items.size() << " items to " << out_path << '\n';
  return kOk;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const StrategyKind strategy = parse_strategy(cfg.strategy);
  const Dataset ds = read_dataset(cfg.dataset);
  const FeatureCache cache = compute_feature_cache(ds);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  std::vector<MetricsRecord> records;
  for (std::uint64_t seed : cfg.seeds) {
    const TrainResult r = train_run(cfg, strategy, ds, cache, seed);
    const std::string ckpt = (dir / (cfg.strategy + "_seed" + std::to_string(seed) + ".ckpt")).string();
    save_checkpoint(ckpt, r.params, checkpoint_meta(cfg, strategy, seed, ds.spec, r.best_epoch));
    records.insert(records.end(), r.records.begin(), r.records.end());
    out << to_string(strategy) << " seed " << seed << ": best epoch " << r.best_epoch << " of " << r.epochs_run
        << ", test balanced_accuracy " << format_real(r.test.balanced_accuracy) << ", macro_auc "
        << format_real(r.test.macro_auc) << ", signal_hit_rate " << format_real(r.test.signal_hit_rate) << " -> "
        << ckpt << '\n';
  }
  std::ostringstream csv;
  write_metrics_csv(csv, records);
  write_text_file(dir / ("metrics_" + to_string(strategy) + ".csv"), csv.str());
  return kOk;
}

struct CheckpointRun {
  Checkpoint ck;
  Dataset ds;
  RunConfig cfg;
  std::uint64_t seed = 0;
};

inline CheckpointRun open_checkpoint_run(const std::string& ckpt_path, const std::string& data_path) {
  CheckpointRun r{load_checkpoint(ckpt_path), read_dataset(data_path), {}, 0};
  try {
    apply_json(r.cfg, r.ck.meta.at("config"));
    r.seed = r.ck.meta.at("seed").get<std::uint64_t>();
    check_compatible(synth_spec_from_json(r.ck.meta.at("data_spec")), r.ds.spec);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint metadata is incomplete: " + std::string(e.what()));
  }
  return r;
}

inline int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& split_name,
                    bool deterministic, std::ostream& out) {
  const Split split = parse_split(split_name);
  CheckpointRun run = open_checkpoint_run(ckpt_path, data_path);
  Model model = model_from_checkpoint(run.ck);
  const FeatureCache cache = compute_feature_cache(run.ds);
  const std::vector<std::size_t> idx = run.ds.split_indices(split);
  if (idx.empty()) throw UsageError("split " + split_name + " is empty");
  const EvalResult r =
      evaluate(model, run.ds, cache, idx, eval_stream(run.seed, split), run.cfg.batch_size, deterministic);
  const MetricsRecord rec{to_string(model.strategy()),
                          run.seed,
                          split_name,
                          run.ck.meta.value("best_epoch", std::size_t{0}),
                          r.loss,
                          r.balanced_accuracy,
                          r.macro_auc,
                          r.signal_hit_rate,
                          0.0};
  write_metrics_csv(out, {rec});
  return kOk;
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  const Dataset ds = read_dataset(cfg.dataset);
  const ComparisonResult result = compare(cfg, ds);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  std::ostringstream table;
  write_comparison_csv(table, result, ds.spec);
  std::ostringstream metrics;
  write_metrics_csv(metrics, result.records);
  write_text_file(dir / "comparison.csv", table.str());
  write_text_file(dir / "metrics.csv", metrics.str());
  out << table.str();
  return kOk;
}

inline int cmd_inspect(const std::string& ckpt_path, const std::string& data_path, const std::string& out_path,
                       const std::string& split_name, bool deterministic, std::ostream& out) {
  const Split split = parse_split(split_name);
  CheckpointRun run = open_checkpoint_run(ckpt_path, data_path);
  Model model = model_from_checkpoint(run.ck);
  const FeatureCache cache = compute_feature_cache(run.ds);
  const std::vector<std::size_t> idx = run.ds.split_indices(split);
  if (idx.empty()) throw UsageError("split " + split_name + " is empty");

  std::ostringstream lines;
  double unique_total = 0.0;
  std::size_t items = 0;
  const auto observe = [&](const std::vector<std::size_t>& batch, const SamplingMatrix& m) {
    std::vector<std::string> ids;
    for (std::size_t i : batch) ids.push_back(std::to_string(run.ds.items[i].id));
    write_sampling_records(lines, ids, m);
    const DedupReport d = dedup_report(m);
    for (std::size_t u : d.unique_per_item) unique_total += static_cast<double>(u) / static_cast<double>(m.rows());
    items += batch.size();
  };
  evaluate(model, run.ds, cache, idx, eval_stream(run.seed, split), run.cfg.batch_size, deterministic, observe);
  ensure_parent_dir(out_path);
  write_text_file(out_path, lines.str());
  out << "wrote " << items << " sampling records to " << out_path << '\n';
  out << "mean unique fraction of selected frames: " << format_real(unique_total / static_cast<double>(items)) << '\n';
  return kOk;
}

inline int cmd_grad_check(std::uint64_t seed, std::size_t points, std::size_t composite_points, std::ostream& out) {
  const auto results = run_gradient_suite(seed, points, composite_points);
  bool ok = true;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-28s max_rel_error %.3e  tol %.0e  %s", r.name.c_str(), r.max_error, r.tolerance,
                  r.passed() ? "ok" : "FAIL");
    out << line << '\n';
    ok = ok && r.passed();
  }
  return ok ? kOk : kFault;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-guided frame subsampling: data generation, training and comparison"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  std::string spec_path;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--spec", spec_path, "JSON synth spec (defaults when omitted)");
  gen->add_option("--out", gen_out, "dataset output path")->required();

  RunFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train one strategy for every configured seed");
  train_flags.attach(*train, false);

  RunFlags compare_flags;
  CLI::App* cmp = app.add_subcommand("compare", "train and evaluate every strategy and seed");
  compare_flags.attach(*cmp, true);

  std::string ckpt_path;
  std::string data_path;
  std::string split_name = "test";
  bool deterministic = false;
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  ev->add_option("--data", data_path, "dataset file")->required();
  ev->add_option("--split", split_name, "train, val or test");
  ev->add_flag("--deterministic", deterministic, "no Gumbel noise");

  std::string inspect_out;
  CLI::App* insp = app.add_subcommand("inspect", "dump sampling matrices as JSON lines");
  insp->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  insp->add_option("--data", data_path, "dataset file")->required();
  insp->add_option("--out", inspect_out, "JSONL output path")->required();
  insp->add_option("--split", split_name, "train, val or test");
  insp->add_flag("--deterministic", deterministic, "no Gumbel noise");

  std::uint64_t gc_seed = 0;
  std::size_t gc_points = 100;
  std::size_t gc_composite = 100;
  CLI::App* gc = app.add_subcommand("grad-check", "finite-difference check of every differentiable op");
  gc->add_option("--seed", gc_seed, "suite seed");
  gc->add_option("--points", gc_points, "random points per primitive");
  gc->add_option("--composite-points", gc_composite, "random seeds for the composite checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*gen) return cmd_generate(spec_path, gen_out, out);
    if (*train) return cmd_train(train_flags.resolve(), out);
    if (*cmp) return cmd_compare(compare_flags.resolve(), out);
    if (*ev) return cmd_eval(ckpt_path, data_path, split_name, deterministic, out);
    if (*insp) return cmd_inspect(ckpt_path, data_path, inspect_out, split_name, deterministic, out);
    if (*gc) return cmd_grad_check(gc_seed, gc_points, gc_composite, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << '\n';
    return kFault;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kFault;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFault;
  }
  return kUsage;
}

}  // namespace das::cli
