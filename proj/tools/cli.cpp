#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "amber/checkpoint.hpp"
#include "amber/dataset.hpp"
#include "amber/metrics.hpp"
#include "amber/model_stats.hpp"
#include "amber/run_config.hpp"
#include "amber/trainer.hpp"
#include "amber/volume_io.hpp"

namespace amber::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Output directory plus the list of files written into it.
class RunOutput {
 public:
  RunOutput(fs::path dir, std::string command, const RunConfig& config)
      : dir_(std::move(dir)), command_(std::move(command)), config_(config) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw IoError("cannot create output directory '" + dir_.string() + "'");
    }
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& text) {
    write_file(dir_ / name, text);
    record(name);
  }

  /// Registers a file or directory written by a library call.
  void record(const std::string& name) { outputs_.push_back(name); }

  /// Writes manifest.json listing every output with its content hash.
  void finish(const json& extra = json::object()) {
    json files = json::array();
    for (const auto& name : outputs_) {
      const fs::path p = dir_ / name;
      if (fs::is_directory(p)) {
        for (const auto& entry : fs::directory_iterator(p)) {
          if (!entry.is_regular_file()) continue;
          files.push_back(file_record(name + "/" + entry.path().filename().string()));
        }
      } else {
        files.push_back(file_record(name));
      }
    }
    json m = {{"format", "amber-run"},
              {"version", kVersion},
              {"command", command_},
              {"seed", config_.seed},
              {"precision", config_.precision},
              {"config", render_run_config(config_)},
              {"outputs", files}};
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_file(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  json file_record(const std::string& name) const {
    const std::string bytes = read_file(dir_ / name);
    return {{"path", name}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}};
  }

  fs::path dir_;
  std::string command_;
  const RunConfig& config_;
  std::vector<std::string> outputs_;
};

/// Loads the dataset named by data.dir or generates phantoms in memory.
std::vector<Sample> obtain_samples(const RunConfig& config, std::ostream& out) {
  if (!config.data.dir.empty()) {
    auto samples = read_dataset(config.data.dir);
    out << "loaded " << samples.size() << " samples from " << config.data.dir << "\n";
    return samples;
  }
  out << "generating " << config.data.count << " phantoms (seed " << config.seed << ")\n";
  return generate_dataset(config.data.phantom, config.data.count, config.seed);
}

void check_dataset(const std::vector<Sample>& samples, const ModelConfig& model) {
  if (samples.empty()) throw InputError("no samples in dataset");
  for (const auto& s : samples) {
    const auto shape = s.image.shape();
    if (shape.c != model.in_channels) {
      throw ConfigError("sample '" + s.id + "' has " + std::to_string(shape.c) +
                        " channels, model.in_channels is " + std::to_string(model.in_channels));
    }
    model.validate_input(spatial(shape));
    check_labels(s.mask, model.num_classes);
  }
}

json stats_record(const ModelConfig& model, const Extent3& input) {
  ModelConfig afno = model;
  afno.mixing = MixingKind::afno;
  ModelConfig mhsa = model;
  mhsa.mixing = MixingKind::mhsa;
  return {{"type", "stats"},
          {"mixing", mixing_name(model.mixing)},
          {"params", closed_form_params(model)},
          {"params_afno", closed_form_params(afno)},
          {"params_mhsa", closed_form_params(mhsa)},
          {"flops", count_flops(model, input).total_flops},
          {"input", extent_string(input)}};
}

// ---------------------------------------------------------------- print-config

int cmd_print_config(const RunConfig& config, const std::optional<fs::path>& out_dir,
                     std::ostream& out) {
  const std::string text = render_run_config(config);
  out << text;
  if (out_dir) {
    RunOutput run(*out_dir, "print-config", config);
    run.write("config.ini", text);
    run.finish();
  }
  return kOk;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  const auto samples = generate_dataset(config.data.phantom, config.data.count, config.seed);
  const auto manifest = write_dataset(out_dir, samples, config.model.num_classes, config.seed);
  out << "wrote " << manifest.samples.size() << " samples (" << extent_string(manifest.grid)
      << ", " << manifest.num_classes << " classes) to " << out_dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

template <typename T>
int cmd_train(const RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  const auto samples = obtain_samples(config, out);
  check_dataset(samples, config.model);

  std::vector<Sample> train_set, heldout;
  if (samples.size() == 1) {
    train_set = samples;
  } else {
    const Split split = make_splits(samples.size(), config.data.train_fraction, config.seed);
    for (auto i : split.train) train_set.push_back(samples[i]);
    for (auto i : split.test) heldout.push_back(samples[i]);
  }

  RunOutput run(out_dir, "train", config);
  SegmentationModel<T> model(config.model, config.seed);
  const Extent3 input = spatial(samples.front().image.shape());
  out << "model: mixing=" << mixing_name(config.model.mixing)
      << " params=" << count_params(model.parameters()).total_params << " train=" << train_set.size()
      << " heldout=" << heldout.size() << " precision=" << config.precision << "\n";

  std::ostringstream report;
  auto on_epoch = [&](const EpochRecord& r) {
    const json line = {{"type", "epoch"},
                       {"epoch", r.epoch},
                       {"steps", r.steps},
                       {"mean_loss", r.mean_loss},
                       {"heldout_dsc", optional_json(r.heldout_dsc)}};
    report << line.dump() << "\n";
    out << "epoch " << std::setw(4) << r.epoch << "  steps " << std::setw(6) << r.steps
        << "  loss " << std::fixed << std::setprecision(6) << r.mean_loss;
    if (r.heldout_dsc) out << "  heldout_dsc " << std::setprecision(4) << *r.heldout_dsc;
    out << std::defaultfloat << "  (" << std::setprecision(3) << r.wall_seconds << " s)\n"
        << std::setprecision(6);
  };

  TrainReport result;
  try {
    result = train(model, train_set, heldout, config.train, on_epoch);
  } catch (const DivergenceError&) {
    run.write("report.jsonl", report.str());
    run.finish({{"status", "diverged"}});
    throw;
  }
  for (std::size_t i = 0; i < result.step_losses.size(); ++i) {
    report << json{{"type", "step"}, {"step", i + 1}, {"loss", result.step_losses[i]}}.dump()
           << "\n";
  }
  report << stats_record(config.model, input).dump() << "\n";
  run.write("report.jsonl", report.str());

  save_checkpoint(run.dir() / "checkpoint", model, static_cast<long>(result.step_losses.size()));
  run.record("checkpoint");
  run.finish({{"status", "ok"}, {"steps", result.step_losses.size()}});
  out << "checkpoint written to " << (run.dir() / "checkpoint").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

template <typename T>
std::unique_ptr<SegmentationModel<T>> eval_model(const RunConfig& config,
                                                 const fs::path& checkpoint,
                                                 bool model_from_config) {
  if (!fs::is_directory(checkpoint)) {
    throw IoError("checkpoint directory '" + checkpoint.string() + "' not found");
  }
  if (!model_from_config) return load_model<T>(checkpoint);
  auto model = std::make_unique<SegmentationModel<T>>(config.model, config.seed);
  load_checkpoint(checkpoint, *model);
  return model;
}

template <typename T>
int cmd_eval(const RunConfig& config, const fs::path& checkpoint, bool model_from_config,
             const fs::path& out_dir, std::ostream& out) {
  auto model = eval_model<T>(config, checkpoint, model_from_config);
  const ModelConfig& mc = model->config();
  const auto samples = obtain_samples(config, out);
  check_dataset(samples, mc);

  RunOutput run(out_dir, "eval", config);
  json per_sample = json::array();
  std::vector<double> class_dsc_sum(mc.num_classes, 0.0);
  double dsc_sum = 0.0;
  double hd_sum = 0.0;
  std::size_t hd_count = 0;
  std::size_t hd_undefined = 0;

  out << std::left << std::setw(14) << "sample" << std::right << std::setw(12) << "mean_dsc"
      << std::setw(12) << "mean_hd95" << "\n";
  for (const auto& s : samples) {
    const LabelMask pred = predict(*model, s.image);
    const MetricReport r = evaluate(pred, s.mask, mc.num_classes, config.data.spacing);
    json classes = json::array();
    for (const auto& c : r.classes) {
      classes.push_back({{"label", c.label}, {"dsc", c.dsc}, {"hd95", optional_json(c.hd95)}});
      class_dsc_sum[c.label] += c.dsc;
      if (c.label == 0) continue;
      if (c.hd95) {
        hd_sum += *c.hd95;
        ++hd_count;
      } else {
        ++hd_undefined;
      }
    }
    dsc_sum += r.mean_dsc;
    per_sample.push_back({{"id", s.id},
                          {"mean_dsc", r.mean_dsc},
                          {"mean_hd95", optional_json(r.mean_hd95)},
                          {"hd95_undefined", r.hd95_undefined},
                          {"classes", classes}});
    out << std::left << std::setw(14) << s.id << std::right << std::fixed << std::setprecision(4)
        << std::setw(12) << r.mean_dsc << std::setw(12)
        << (r.mean_hd95 ? std::to_string(*r.mean_hd95) : std::string("undefined")) << "\n"
        << std::defaultfloat;
  }

  const double n = static_cast<double>(samples.size());
  json class_means = json::array();
  for (std::size_t k = 0; k < mc.num_classes; ++k) {
    class_means.push_back({{"label", k}, {"mean_dsc", class_dsc_sum[k] / n}});
  }
  const std::optional<double> mean_hd =
      hd_count ? std::optional<double>(hd_sum / static_cast<double>(hd_count)) : std::nullopt;
  const json aggregate = {{"samples", samples.size()},
                          {"num_classes", mc.num_classes},
                          {"mean_dsc", dsc_sum / n},
                          {"mean_hd95", optional_json(mean_hd)},
                          {"hd95_undefined", hd_undefined},
                          {"classes", class_means},
                          {"checkpoint", checkpoint.string()}};
  run.write("eval_samples.json", per_sample.dump(2) + "\n");
  run.write("eval_summary.json", aggregate.dump(2) + "\n");
  run.finish();
  out << "mean foreground DSC " << std::fixed << std::setprecision(4) << dsc_sum / n << "\n"
      << std::defaultfloat;
  return kOk;
}

// ---------------------------------------------------------------- stats

template <typename T>
int cmd_stats(const RunConfig& config, const fs::path& out_dir, std::ostream& out) {
  const ModelConfig& mc = config.model;
  const Extent3 input = config.stats.input;
  SegmentationModel<T> model(mc, config.seed);
  const CostBreakdown params = count_params(model.parameters());
  const CostBreakdown flops = count_flops(mc, input);

  std::ostringstream text;
  text << "model mixing=" << mixing_name(mc.mixing) << " dims=" << stage_array_string(mc.dims)
       << " depths=" << stage_array_string(mc.depths) << " input=" << extent_string(input)
       << "\n\n";
  text << std::left << std::setw(34) << "layer" << std::setw(16) << "kind" << std::right
       << std::setw(12) << "params" << std::setw(16) << "flops" << "\n";
  json layers = json::array();
  for (const auto& e : flops.entries) {
    const CostEntry* p = params.find(e.name);
    const std::uint64_t stored = p ? p->params : 0;
    text << std::left << std::setw(34) << e.name << std::setw(16) << e.kind << std::right
         << std::setw(12) << stored << std::setw(16) << e.flops << "\n";
    layers.push_back({{"name", e.name}, {"kind", e.kind}, {"params", stored}, {"flops", e.flops}});
  }
  text << std::left << std::setw(50) << "total" << std::right << std::setw(12)
       << params.total_params << std::setw(16) << flops.total_flops << "\n\n";

  const json summary = stats_record(mc, input);
  text << "params afno=" << summary["params_afno"].get<std::uint64_t>()
       << " mhsa=" << summary["params_mhsa"].get<std::uint64_t>() << "\n\n";

  json crossover = json::array();
  text << "mixing-layer crossover (first token count where MHSA exceeds AFNO)\n";
  for (std::size_t i = 0; i < kNumStages; ++i) {
    const CrossoverReport cr = mixing_crossover(mc.afno_config(i), config.stats.sweep_max_log2);
    json sweep = json::array();
    for (const auto& pt : cr.sweep) {
      sweep.push_back({{"grid", extent_string(pt.dims)},
                       {"tokens", pt.tokens},
                       {"afno_flops", pt.afno},
                       {"mhsa_flops", pt.mhsa}});
    }
    crossover.push_back({{"stage", i},
                         {"channels", mc.dims[i]},
                         {"crossover_tokens", cr.crossover_tokens},
                         {"sweep", sweep}});
    text << "  stage" << i << " C=" << std::setw(4) << mc.dims[i] << "  crossover_tokens="
         << cr.crossover_tokens << "\n";
  }

  const json doc = {{"mixing", mixing_name(mc.mixing)},
                    {"input", extent_string(input)},
                    {"total_params", params.total_params},
                    {"closed_form_params", closed_form_params(mc)},
                    {"total_flops", flops.total_flops},
                    {"params_afno", summary["params_afno"]},
                    {"params_mhsa", summary["params_mhsa"]},
                    {"layers", layers},
                    {"crossover", crossover}};
  RunOutput run(out_dir, "stats", config);
  run.write("stats.txt", text.str());
  run.write("stats.json", doc.dump(2) + "\n");
  run.finish();
  out << text.str();
  return kOk;
}

// ---------------------------------------------------------------- bench

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename T>
int cmd_bench(const RunConfig& config, const fs::path& out_dir, std::ostream& out,
              std::ostream& err) {
  using clock = std::chrono::steady_clock;
  SegmentationModel<T> model(config.model, config.seed);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t reps = config.bench.repetitions;
  const std::size_t batch = config.bench.batch;

  std::ostringstream text;
  text << std::left << std::setw(14) << "shape" << std::setw(9) << "status" << std::right
       << std::setw(14) << "forward_ms" << std::setw(18) << "fwd+bwd_ms" << "\n";
  json rows = json::array();
  std::size_t ok = 0;
  for (const Extent3& shape : config.bench.shapes) {
    json row = {{"shape", extent_string(shape)}, {"batch", batch}, {"repetitions", reps}};
    try {
      config.model.validate_input(shape);
    } catch (const ConfigError& e) {
      err << "warning: skipping shape " << extent_string(shape) << ": " << e.what() << "\n";
      row["status"] = "skipped";
      row["reason"] = e.what();
      row["forward_ms"] = nullptr;
      row["forward_backward_ms"] = nullptr;
      rows.push_back(row);
      text << std::left << std::setw(14) << extent_string(shape) << std::setw(9) << "skipped"
           << std::right << std::setw(14) << "-" << std::setw(18) << "-" << "\n";
      continue;
    }
    Volume<T> x(Shape5{batch, shape.d, shape.h, shape.w, config.model.in_channels});
    for (auto& v : x.storage()) v = static_cast<T>(normal(rng));
    const std::vector<LabelMask> truth(batch, LabelMask(shape));

    std::vector<double> fwd, fwd_bwd;
    for (std::size_t r = 0; r < reps; ++r) {
      auto t0 = clock::now();
      model.forward(x, false);
      auto t1 = clock::now();
      loss_and_gradients(model, x, truth, config.train);
      auto t2 = clock::now();
      fwd.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      fwd_bwd.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
    row["status"] = "ok";
    row["forward_ms"] = median(fwd);
    row["forward_backward_ms"] = median(fwd_bwd);
    rows.push_back(row);
    ++ok;
    text << std::left << std::setw(14) << extent_string(shape) << std::setw(9) << "ok"
         << std::right << std::fixed << std::setprecision(3) << std::setw(14) << median(fwd)
         << std::setw(18) << median(fwd_bwd) << "\n"
         << std::defaultfloat;
  }

  RunOutput run(out_dir, "bench", config);
  run.write("bench.txt", text.str());
  run.write("bench.json",
            json{{"mixing", mixing_name(config.model.mixing)}, {"rows", rows}}.dump(2) + "\n");
  run.finish();
  out << text.str();
  if (ok == 0) throw ConfigError("no legal shape in bench.shapes");
  return kOk;
}

template <typename F>
int dispatch_precision(int precision, F&& f) {
  return precision == 64 ? f(double{}) : f(float{});
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fourier-mixing 3D segmentation toolkit", "amber"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::string out_dir = "amber_out";
  std::optional<std::uint64_t> seed;
  std::optional<int> precision;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "Run configuration (INI)")->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Master seed (run.seed)");
  app.add_option("--precision", precision, "Floating-point width")->check(CLI::IsMember({32, 64}));
  app.add_option("--set", sets, "Override section.key=value; repeatable");
  app.fallthrough();

  auto* print_cmd = app.add_subcommand("print-config", "Print the full configuration");

  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic phantom dataset");
  std::optional<std::size_t> count;
  gen_cmd->add_option("--count", count, "Number of samples (data.count)");

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::optional<std::string> data_dir, mixing;
  std::optional<std::size_t> epochs, max_steps;
  std::optional<double> lr;
  train_cmd->add_option("--data", data_dir, "Dataset directory (data.dir)");
  train_cmd->add_option("--mixing", mixing, "afno or mhsa (model.mixing)");
  train_cmd->add_option("--epochs", epochs, "train.epochs");
  train_cmd->add_option("--max-steps", max_steps, "train.max_steps");
  train_cmd->add_option("--lr", lr, "train.learning_rate");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string checkpoint;
  bool model_from_config = false;
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", data_dir, "Dataset directory (data.dir)");
  eval_cmd->add_flag("--model-from-config", model_from_config,
                     "Build the model from the config and require the checkpoint to match");

  auto* stats_cmd = app.add_subcommand("stats", "Analytic parameter and FLOP breakdown");
  std::optional<std::string> input;
  stats_cmd->add_option("--input", input, "Input grid DxHxW (stats.input)");
  stats_cmd->add_option("--mixing", mixing, "afno or mhsa (model.mixing)");

  auto* bench_cmd = app.add_subcommand("bench", "Forward/backward wall time over shapes");
  std::optional<std::string> shapes;
  std::optional<std::size_t> reps;
  bench_cmd->add_option("--shapes", shapes, "Semicolon-separated DxHxW list (bench.shapes)");
  bench_cmd->add_option("--repetitions", reps, "bench.repetitions");
  bench_cmd->add_option("--mixing", mixing, "afno or mhsa (model.mixing)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  try {
    ConfigOverrides overrides;
    for (const auto& s : sets) overrides.push_back(parse_override(s));
    auto put = [&](const char* key, const auto& value) {
      if (!value) return;
      std::ostringstream os;
      os << *value;
      overrides.emplace_back(key, os.str());
    };
    put("run.seed", seed);
    put("run.precision", precision);
    put("data.count", count);
    put("data.dir", data_dir);
    put("model.mixing", mixing);
    put("train.epochs", epochs);
    put("train.max_steps", max_steps);
    put("train.learning_rate", lr);
    put("stats.input", input);
    put("bench.shapes", shapes);
    put("bench.repetitions", reps);

    const RunConfig config = config_path.empty() ? parse_run_config("", overrides)
                                                 : load_run_config(config_path, overrides);
    config.validate();
    const fs::path out_path = out_dir;

    if (print_cmd->parsed()) {
      return cmd_print_config(config,
                              out_opt->count() ? std::optional<fs::path>(out_path) : std::nullopt,
                              out);
    }
    if (gen_cmd->parsed()) return cmd_gen_data(config, out_path, out);
    return dispatch_precision(config.precision, [&](auto tag) -> int {
      using T = decltype(tag);
      if (train_cmd->parsed()) return cmd_train<T>(config, out_path, out);
      if (eval_cmd->parsed()) {
        return cmd_eval<T>(config, checkpoint, model_from_config, out_path, out);
      }
      if (stats_cmd->parsed()) return cmd_stats<T>(config, out_path, out);
      return cmd_bench<T>(config, out_path, out, err);
    });
  } catch (const ConfigError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kValidation;
  } catch (const DivergenceError& e) {
    err << "diverged at step " << e.step() << ": " << e.what() << "\n";
    return kRuntime;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace amber::cli
