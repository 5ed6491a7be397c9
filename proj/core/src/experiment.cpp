#include "gradfilter/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <type_traits>
#include <variant>

#include "gradfilter/checkpoint.hpp"
#include "gradfilter/cost_model.hpp"
#include "gradfilter/csv.hpp"
#include "gradfilter/data.hpp"
#include "gradfilter/errors.hpp"
#include "gradfilter/filter.hpp"
#include "gradfilter/optim.hpp"
#include "gradfilter/rng.hpp"
#include "gradfilter/spectral.hpp"
#include "gradfilter/train.hpp"

namespace gradfilter {

namespace fs = std::filesystem;

namespace {

fs::path prepare_out(const ExperimentCfg& cfg, RunResult& result) {
  const fs::path out = cfg.str("out");
  if (out.empty()) throw ConfigError("config: 'out' must name a directory");
  fs::create_directories(out);
  const fs::path resolved = out / "resolved-config.txt";
  std::ofstream(resolved, std::ios::binary) << cfg.resolved();
  result.files.push_back(resolved);
  return out;
}

std::string u64(std::uint64_t v) { return std::to_string(v); }

// ---- data -------------------------------------------------------------------

struct DataPlan {
  bool idx = false;
  SynthCfg synth;
  fs::path images;
  fs::path labels;
};

DataPlan data_plan(const ExperimentCfg& cfg) {
  DataPlan plan;
  const std::string& kind = cfg.str("data");
  if (kind == "idx") {
    plan.idx = true;
    plan.images = cfg.str("images");
    plan.labels = cfg.str("labels");
    if (plan.images.empty() || plan.labels.empty()) {
      throw ConfigError("config: data = idx needs 'images' and 'labels' paths");
    }
  } else if (kind == "synthetic") {
    plan.synth.seed = cfg.count("seed");
    plan.synth.classes = cfg.count("classes");
    plan.synth.per_class = cfg.count("per_class");
    plan.synth.channels = cfg.count("channels");
    plan.synth.height = cfg.count("height");
    plan.synth.width = cfg.count("width");
    plan.synth.noise = cfg.real("noise");
    if (plan.synth.classes < 2) throw ConfigError("config: classes must be >= 2");
    if (plan.synth.per_class < 1 || plan.synth.channels < 1 || plan.synth.height < 1 ||
        plan.synth.width < 1) {
      throw ConfigError("config: per_class, channels, height and width must be >= 1");
    }
    if (plan.synth.noise < 0.0) throw ConfigError("config: noise must be >= 0");
  } else {
    throw ConfigError("config: data must be 'synthetic' or 'idx', got '" + kind + "'");
  }
  return plan;
}

Dataset load_data(const DataPlan& plan) {
  return plan.idx ? load_idx(plan.images, plan.labels) : synth_dataset(plan.synth);
}

// ---- model/training ---------------------------------------------------------

struct TrainPlan {
  ConvMode mode;
  std::optional<std::size_t> layers;  // nullopt = all
  PartialPatchMode partial = PartialPatchMode::true_mean;
  TrainCfg train;
  double val_fraction = 0.2;
  std::size_t split_shards = 0;
  std::size_t pretrain_epochs = 0;
};

TrainPlan train_plan(const ExperimentCfg& cfg) {
  TrainPlan plan;
  const std::string& mode = cfg.str("mode");
  if (mode == "vanilla") {
    plan.mode = ConvMode::vanilla();
  } else if (mode == "filtered") {
    const std::int64_t r = cfg.integer("r");
    if (r < 1) throw ConfigError("config: r must be >= 1 for mode = filtered");
    plan.mode = ConvMode::filtered(static_cast<std::size_t>(r));
  } else {
    throw ConfigError("config: mode must be 'vanilla' or 'filtered', got '" + mode + "'");
  }
  if (cfg.str("layers") != "all") plan.layers = cfg.count("layers");

  const std::string& partial = cfg.str("partial_patch");
  if (partial == "true_mean") {
    plan.partial = PartialPatchMode::true_mean;
  } else if (partial == "strict_r2") {
    plan.partial = PartialPatchMode::strict_r2;
  } else {
    throw ConfigError("config: partial_patch must be 'true_mean' or 'strict_r2'");
  }

  plan.train.epochs = cfg.count("epochs");
  plan.train.batch_size = cfg.count("batch_size");
  plan.train.base_lr = cfg.real("lr");
  plan.train.momentum = cfg.real("momentum");
  plan.train.weight_decay = cfg.real("weight_decay");
  plan.train.clip_threshold = cfg.real("clip");
  plan.train.warmup_epochs = cfg.count("warmup_epochs");
  plan.train.seed = cfg.count("seed");
  plan.train.validate();

  plan.val_fraction = cfg.real("val_fraction");
  if (!(plan.val_fraction > 0.0 && plan.val_fraction < 1.0)) {
    throw ConfigError("config: val_fraction must be in (0, 1)");
  }
  plan.split_shards = cfg.count("split_shards");
  plan.pretrain_epochs = cfg.count("pretrain_epochs");
  if (plan.split_shards != 0 && (plan.split_shards < 2 || plan.split_shards % 2 != 0)) {
    throw ConfigError("config: split_shards must be 0 or an even number >= 2");
  }
  if (plan.pretrain_epochs > 0 && plan.split_shards == 0) {
    throw ConfigError("config: pretrain_epochs needs split_shards > 0");
  }
  return plan;
}

std::vector<std::vector<std::string>> epoch_rows(const TrainMetrics& m) {
  std::vector<std::vector<std::string>> rows;
  for (const EpochMetrics& e : m.epochs) {
    rows.push_back({u64(e.epoch), format_real(e.train_loss), format_real(e.train_acc),
                    format_real(e.val_acc), format_real(e.lr)});
  }
  return rows;
}

const std::vector<std::string> kEpochHeader = {"epoch", "train_loss", "train_acc", "val_acc", "lr"};

Model build_model(const ExperimentCfg& cfg, const Dataset& data) {
  if (!cfg.str("checkpoint").empty()) {
    Model m = load_checkpoint(cfg.str("checkpoint"));
    const Shape4& s = data.images.shape();
    if (m.input_shape().d1 != s.d1 || m.input_shape().d2 != s.d2 || m.input_shape().d3 != s.d3) {
      throw ConfigError("checkpoint input shape " + to_string(m.input_shape()) +
                        " does not match data " + to_string(s));
    }
    return m;
  }
  const Shape4& s = data.images.shape();
  return make_desk_model(s.d1, s.d2, s.d3, data.class_count, cfg.count("seed"));
}

// ---- single-patch SNR trials ------------------------------------------------

Map2 gaussian_map(std::size_t h, std::size_t w, Rng& rng) {
  Map2 m(h, w);
  for (double& v : m.values) v = rng.normal();
  return m;
}

// Adds a growing DC offset until both the kernel's own spectrum and the
// spectrum on the patch grid satisfy DC energy >= max AC energy.
Map2 dc_dominant_kernel(std::size_t k, std::size_t patch, Rng& rng) {
  const Map2 base = gaussian_map(k, k, rng);
  Map2 kernel = base;
  for (double offset = 0.0;; offset += 0.25) {
    for (std::size_t i = 0; i < base.values.size(); ++i) kernel.values[i] = base.values[i] + offset;
    Kernel4 as_kernel({1, 1, k, k}, kernel.values);
    if (dc_energy_ratio(as_kernel).minimum >= 1.0 &&
        dc_energy_ratio_on_grid(kernel, patch, patch) >= 1.0) {
      return kernel;
    }
  }
}

}  // namespace

RunResult run_train(const ExperimentCfg& cfg) {
  const DataPlan data = data_plan(cfg);
  const TrainPlan plan = train_plan(cfg);

  const Dataset full = load_data(data);
  Dataset target = full;
  std::optional<Dataset> pretrain_set;
  if (plan.split_shards > 0) {
    auto [a, b] = noniid_split(full, SplitSpec{plan.split_shards, cfg.count("seed")});
    pretrain_set = std::move(a);
    target = std::move(b);
  }
  Model model = build_model(cfg, target);
  if (plan.layers && *plan.layers > model.conv_count()) {
    throw ConfigError("config: layers = " + std::to_string(*plan.layers) + " but the model has " +
                      std::to_string(model.conv_count()) + " conv layers");
  }
  model.set_partial_patch_mode(plan.partial);

  RunResult result;
  const fs::path out = prepare_out(cfg, result);

  if (plan.pretrain_epochs > 0) {
    auto [pre_train, pre_val] = train_val_split(*pretrain_set, plan.val_fraction, cfg.count("seed"));
    model.set_active_layers(model.conv_count(), ConvMode::vanilla());
    TrainCfg pre = plan.train;
    pre.epochs = plan.pretrain_epochs;
    const TrainMetrics pm = train(model, pre_train, pre_val, pre);
    write_csv(out / "pretrain-metrics.csv", kEpochHeader, epoch_rows(pm));
    result.files.push_back(out / "pretrain-metrics.csv");
  }

  auto [train_set, val_set] = train_val_split(target, plan.val_fraction, cfg.count("seed"));
  const std::size_t k = plan.layers.value_or(model.conv_count());
  model.set_active_layers(k, plan.mode);
  const TrainMetrics m = train(model, train_set, val_set, plan.train);

  write_csv(out / "metrics.csv", kEpochHeader, epoch_rows(m));
  const bool filtered = plan.mode.kind == ConvMode::Kind::filtered;
  write_csv(out / "summary.csv",
            {"mode", "layers", "r", "best_val_acc", "training_flops", "stored_activation_elements"},
            {{cfg.str("mode"), plan.layers ? u64(*plan.layers) : std::string("all"),
              filtered ? u64(plan.mode.r) : std::string(), format_real(m.best_val_acc),
              u64(m.training_flops), u64(m.peak_stored_activation_elements)}});
  save_checkpoint(model, out / "model.ckpt");
  result.files.push_back(out / "metrics.csv");
  result.files.push_back(out / "summary.csv");
  result.files.push_back(out / "model.ckpt");
  result.message = "best_val_acc " + format_real(m.best_val_acc);
  return result;
}

RunResult run_cost_sweep(const ExperimentCfg& cfg) {
  LayerCfg layer{cfg.count("cx"), cfg.count("cy"), cfg.count("hy"), cfg.count("wy"),
                 cfg.count("kh"), cfg.count("kw"), cfg.count("hx"), cfg.count("wx")};
  if (layer.h_x == 0) layer.h_x = layer.h_y;
  if (layer.w_x == 0) layer.w_x = layer.w_y;
  layer.validate();
  const auto r_values = cfg.count_list("r_list");
  for (auto r : r_values) {
    if (r == 0) throw ConfigError("config: r_list entries must be >= 1");
  }

  RunResult result;
  const fs::path out = prepare_out(cfg, result);
  const std::uint64_t floor_flops = min_flops(layer);
  std::vector<std::vector<std::string>> rows;
  for (const CostReport& c : sweep_curve(layer, r_values)) {
    rows.push_back({u64(c.r), u64(c.leading_term), u64(c.overhead.total()), u64(c.flops),
                    u64(floor_flops), format_real(c.memory_saving_fraction)});
  }
  write_csv(out / "sweep.csv",
            {"r", "leading_term", "overhead", "total", "min_flops", "saving_fraction"}, rows);
  write_csv(out / "layer.csv", {"vanilla_flops", "min_flops"},
            {{u64(vanilla_bp_flops(layer)), u64(floor_flops)}});
  result.files.push_back(out / "sweep.csv");
  result.files.push_back(out / "layer.csv");
  return result;
}

RunResult run_verify_prop1(const ExperimentCfg& cfg) {
  const std::size_t trials = cfg.count("trials");
  const std::size_t patch = cfg.count("patch");
  const std::size_t k = cfg.count("kernel");
  if (patch < 1 || k < 1 || k > patch) {
    throw ConfigError("config: need 1 <= kernel <= patch for verify-prop1");
  }
  const bool edge = cfg.flag("edge_trials");

  RunResult result;
  const fs::path out = prepare_out(cfg, result);
  Rng rng(cfg.count("seed"));
  std::vector<std::vector<std::string>> rows;
  std::size_t violations = 0;
  auto record = [&](std::size_t trial, const Map2& kernel, const Map2& g_y, const char* kind) {
    const SnrReport rep = verify_prop1(kernel, g_y);
    const double own = dc_energy_ratio(Kernel4({1, 1, kernel.h, kernel.w}, kernel.values)).minimum;
    const double grid = dc_energy_ratio_on_grid(kernel, patch, patch);
    if (own >= 1.0 && grid >= 1.0 && !rep.holds) ++violations;
    rows.push_back({u64(trial), format_real(rep.snr_gy), format_real(rep.snr_gx),
                    format_real(own), rep.holds ? "1" : "0", format_real(grid), kind});
  };

  for (std::size_t t = 0; t < trials; ++t) {
    const Map2 g_y = gaussian_map(patch, patch, rng);
    const Map2 kernel = dc_dominant_kernel(k, patch, rng);
    record(t, kernel, g_y, "random");
  }
  if (edge) {
    Map2 impulse(k, k);
    impulse(0, 0) = 1.0;
    record(trials, impulse, gaussian_map(patch, patch, rng), "impulse");
    const Map2 constant(patch, patch, std::vector<double>(patch * patch, 0.5));
    record(trials + 1, dc_dominant_kernel(k, patch, rng), constant, "constant");
  }

  write_csv(out / "trials.csv",
            {"trial", "snr_gy", "snr_gx", "dc_ratio", "holds", "dc_ratio_grid", "kind"}, rows);
  write_csv(out / "prop1-summary.csv", {"trials", "violations", "result"},
            {{u64(rows.size()), u64(violations), violations == 0 ? "pass" : "fail"}});
  result.files.push_back(out / "trials.csv");
  result.files.push_back(out / "prop1-summary.csv");
  if (violations > 0) {
    result.exit_code = kExitPropertyViolation;
    result.message = std::to_string(violations) + " DC-dominant trial(s) lowered the SNR";
  } else {
    result.message = "all " + std::to_string(rows.size()) + " trials hold";
  }
  return result;
}

RunResult run_snr_probe(const ExperimentCfg& cfg) {
  if (cfg.str("checkpoint").empty()) throw ConfigError("config: snr-probe needs 'checkpoint'");
  const std::size_t probe = cfg.count("probe_batch");
  if (probe == 0) throw ConfigError("config: probe_batch must be >= 1 (empty batch)");
  const auto r_values = cfg.count_list("snr_r_list");
  for (auto r : r_values) {
    if (r == 0) throw ConfigError("config: snr_r_list entries must be >= 1");
  }
  const DataPlan data = data_plan(cfg);
  const Dataset full = load_data(data);
  Model model = build_model(cfg, full);

  std::vector<std::size_t> idx(std::min<std::size_t>(probe, full.size()));
  std::iota(idx.begin(), idx.end(), 0);
  const Dataset batch = full.subset(idx);

  RunResult result;
  const fs::path out = prepare_out(cfg, result);

  // Exact backward pass; at each conv layer compare the exact g_y and g_x
  // with their filtered counterparts.
  model.set_active_layers(model.conv_count(), ConvMode::vanilla());
  const Tensor4 logits = model.forward(batch.images, true);
  Tensor4 g = cross_entropy(logits, batch.labels).grad;

  std::vector<std::vector<std::string>> rows;
  auto& layers = model.layers();
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (auto* c = std::get_if<ConvLayer>(&layers[i])) {
      const Tensor4& x = *c->saved_input;
      const Tensor4 g_x = conv2d_backward_input(g, c->weights, c->cfg);
      std::vector<std::vector<std::string>> layer_rows;
      for (auto r : r_values) {
        const FilterCfg fc{r, c->partial};
        const double snr_gy = measure_snr(g, expand(filter_gradient(g, fc)));
        const double snr_gx = measure_snr(g_x, filtered_conv_bp(x, c->weights, g, fc).g_x);
        layer_rows.push_back({u64(i), u64(r), format_real(snr_gy), format_real(snr_gx)});
      }
      rows.insert(rows.begin(), layer_rows.begin(), layer_rows.end());
      g = g_x;
    } else if (auto* l = std::get_if<LinearLayer>(&layers[i])) {
      g = *l->backward(g, true);
    } else {
      std::visit(
          [&](auto& layer) {
            using T = std::decay_t<decltype(layer)>;
            if constexpr (!std::is_same_v<T, ConvLayer> && !std::is_same_v<T, LinearLayer>) {
              g = layer.backward(g);
            }
          },
          layers[i]);
    }
  }
  write_csv(out / "snr.csv", {"layer", "r", "snr", "snr_gx"}, rows);
  result.files.push_back(out / "snr.csv");
  return result;
}

RunResult run_dc_ratio(const ExperimentCfg& cfg) {
  if (cfg.str("checkpoint").empty()) throw ConfigError("config: dc-ratio needs 'checkpoint'");
  const Model model = load_checkpoint(cfg.str("checkpoint"));

  RunResult result;
  const fs::path out = prepare_out(cfg, result);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<std::string>> summary;
  double aggregate = kInfinity;
  for (std::size_t i : model.conv_indices()) {
    const auto& c = std::get<ConvLayer>(model.layers()[i]);
    const DcRatioReport rep = dc_energy_ratio(c.weights);
    for (std::size_t o = 0; o < rep.c_out; ++o) {
      for (std::size_t in = 0; in < rep.c_in; ++in) {
        rows.push_back({u64(i), u64(o), u64(in), format_real(rep(o, in))});
      }
    }
    summary.push_back({u64(i), format_real(rep.minimum)});
    aggregate = std::min(aggregate, rep.minimum);
  }
  summary.push_back({"all", format_real(aggregate)});
  write_csv(out / "dc-ratio.csv", {"layer", "c_out", "c_in", "ratio"}, rows);
  write_csv(out / "dc-summary.csv", {"layer", "min_ratio"}, summary);
  result.files.push_back(out / "dc-ratio.csv");
  result.files.push_back(out / "dc-summary.csv");
  result.message = "minimum ratio " + format_real(aggregate);
  return result;
}

RunResult run_experiment(const ExperimentCfg& cfg) {
  const std::string& command = cfg.str("command");
  if (command == "train") return run_train(cfg);
  if (command == "cost-sweep") return run_cost_sweep(cfg);
  if (command == "verify-prop1") return run_verify_prop1(cfg);
  if (command == "snr-probe") return run_snr_probe(cfg);
  if (command == "dc-ratio") return run_dc_ratio(cfg);
  throw ConfigError("config: unknown command '" + command + "'");
}

}  // namespace gradfilter
