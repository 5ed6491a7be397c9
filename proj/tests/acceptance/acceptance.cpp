// Acceptance suite. One PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 3 7        run criteria 3 and 7
//
// Exit status is non-zero if any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradfilter/conv.hpp"
#include "gradfilter/cost_model.hpp"
#include "gradfilter/csv.hpp"
#include "gradfilter/experiment.hpp"
#include "gradfilter/filter.hpp"
#include "gradfilter/model.hpp"
#include "gradfilter/spectral.hpp"
#include "oracles.hpp"

using namespace gradfilter;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "gradfilter_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double best_val_acc(const fs::path& dir) { return std::stod(read_csv(dir / "summary.csv")[1][3]); }

// ---------------------------------------------------------------------------

Outcome cost_model_reproduction() {
  const LayerCfg layer = LayerCfg::same(192, 64, 120, 160, 3, 3);
  const auto vanilla = vanilla_bp_flops(layer);
  const auto leading = filtered_bp_flops(layer, 4).leading_term;
  const auto floor_flops = min_flops(layer);
  const bool ok = vanilla == 4'246'732'800u && leading == 29'260'800u && floor_flops == 24'384u;
  return {ok, "vanilla " + std::to_string(vanilla) + ", leading(r=4) " + std::to_string(leading) +
                  ", min " + std::to_string(floor_flops)};
}

Outcome instrumentation_identity() {
  Rng rng(202);
  std::size_t matched = 0;
  const std::size_t cases = 40;
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t k = gftest::between(rng, 1, 5);
    const std::size_t p = gftest::between(rng, 0, k - 1);
    const std::size_t cx = gftest::between(rng, 1, 4);
    const std::size_t cy = gftest::between(rng, 1, 4);
    const std::size_t hx = gftest::between(rng, k, 9);
    const std::size_t wx = gftest::between(rng, k, 9);
    const std::size_t hy = hx + 2 * p - k + 1;
    const std::size_t wy = wx + 2 * p - k + 1;
    const Tensor4 g = gftest::random_tensor({1, cy, hy, wy}, rng);
    const Kernel4 w = gftest::random_kernel({cy, cx, k, k}, rng);
    const auto ops = counted_backward_input(g, w, {p}).second;
    const LayerCfg cfg{cx, cy, hy, wy, k, k, hx, wx};
    if (2 * ops.multiplies == vanilla_bp_flops(cfg)) ++matched;
  }
  return {matched == cases, std::to_string(matched) + "/" + std::to_string(cases) + " configs exact"};
}

Outcome gradient_correctness() {
  Rng rng(303);
  const std::size_t cases = 60;
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t k = gftest::between(rng, 1, 3);
    const std::size_t p = gftest::between(rng, 0, k - 1);
    const std::size_t ci = gftest::between(rng, 1, 3);
    const std::size_t co = gftest::between(rng, 1, 3);
    Tensor4 x = gftest::random_tensor({gftest::between(rng, 1, 2), ci, gftest::between(rng, k, 6),
                                       gftest::between(rng, k, 6)}, rng);
    Kernel4 w = gftest::random_kernel({co, ci, k, k}, rng);
    std::vector<double> b(co);
    for (double& v : b) v = rng.uniform(-1, 1);
    const Tensor4 c = gftest::random_tensor(conv2d_forward(x, w, b, {p}).shape(), rng);

    auto fd = [&](std::span<double> params) {
      std::vector<double> out(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = gftest::probe_loss(x, w, b, p, c);
        params[i] = keep - h;
        const double down = gftest::probe_loss(x, w, b, p, c);
        params[i] = keep;
        out[i] = (up - down) / (2 * h);
      }
      return out;
    };
    const Tensor4 gx = conv2d_backward_input(c, w, {p});
    const Kernel4 gk = conv2d_backward_kernel(c, x, {p});
    const std::vector<double> gb = conv2d_backward_bias(c);
    worst = std::max(worst, gftest::rel_diff(gx.values(), fd(x.values())));
    worst = std::max(worst, gftest::rel_diff(gk.values(), fd(w.values())));
    worst = std::max(worst, gftest::rel_diff(gb, fd(b)));
  }
  return {worst < 1e-6, std::to_string(cases) + " instances, worst relative error " + fmt("%.3g", worst)};
}

Outcome exact_collapse() {
  Rng rng(404);
  const std::size_t cases = 60;
  double worst = 0.0;
  for (std::size_t t = 0; t < cases; ++t) {
    const Shape4 xs{gftest::between(rng, 1, 3), gftest::between(rng, 1, 4), gftest::between(rng, 1, 7),
                    gftest::between(rng, 1, 7)};
    const Tensor4 x = gftest::random_tensor(xs, rng);
    const Kernel4 w = gftest::random_kernel({gftest::between(rng, 1, 4), xs.d1, 1, 1}, rng);
    const Tensor4 g = gftest::random_tensor({xs.d0, w.shape().d0, xs.d2, xs.d3}, rng);
    const FilteredGrads f = filtered_conv_bp(x, w, g, {1});
    worst = std::max(worst, gftest::rel_diff(conv2d_backward_input(g, w, {}).values(), f.g_x.values()));
    worst = std::max(worst, gftest::rel_diff(conv2d_backward_kernel(g, x, {}).values(), f.g_k.values()));
    worst = std::max(worst, gftest::rel_diff(conv2d_backward_bias(g), f.g_b));
  }
  return {worst <= 1e-12, std::to_string(cases) + " instances, worst relative error " + fmt("%.3g", worst)};
}

Outcome oracle_equivalence() {
  Rng rng(505);
  const std::size_t cases = 60;
  double worst = 0.0;
  bool taps_constant = true;
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t k = 2 * gftest::between(rng, 0, 2) + 1;
    const std::size_t r = gftest::between(rng, 1, 4);
    const Shape4 xs{gftest::between(rng, 1, 2), gftest::between(rng, 1, 3), gftest::between(rng, k, 10),
                    gftest::between(rng, k, 10)};
    const Tensor4 x = gftest::random_tensor(xs, rng);
    const Kernel4 w = gftest::random_kernel({gftest::between(rng, 1, 3), xs.d1, k, k}, rng);
    const Tensor4 g = gftest::random_tensor({xs.d0, w.shape().d0, xs.d2, xs.d3}, rng);
    const FilteredGrads f = filtered_conv_bp(x, w, g, {r});
    const gftest::NaiveFiltered ref = gftest::naive_filtered_bp(x, w, g, r, false);
    worst = std::max(worst, gftest::rel_diff(ref.g_x.values(), f.g_x.values()));
    worst = std::max(worst, gftest::rel_diff(ref.g_k.values(), f.g_k.values()));
    for (std::size_t o = 0; o < w.shape().d0; ++o)
      for (std::size_t i = 0; i < xs.d1; ++i)
        for (double tap : f.g_k.plane(o, i)) taps_constant = taps_constant && tap == f.g_k(o, i, 0, 0);
  }
  return {worst <= 1e-12 && taps_constant,
          std::to_string(cases) + " instances, worst relative error " + fmt("%.3g", worst) +
              (taps_constant ? ", taps constant" : ", taps NOT constant")};
}

Outcome snr_inequality() {
  Rng rng(606);
  std::size_t held = 0;
  const std::size_t trials = 1000;
  for (std::size_t t = 0; t < trials; ++t) {
    Map2 g_y(8, 8);
    for (double& v : g_y.values) v = rng.normal();
    Map2 kernel(3, 3);
    for (double& v : kernel.values) v = rng.normal();
    // Raise the DC component until it dominates every AC bin.
    while (dc_energy_ratio_on_grid(kernel, 8, 8) < 1.0 ||
           dc_energy_ratio(Kernel4({1, 1, 3, 3}, kernel.values)).minimum < 1.0) {
      for (double& v : kernel.values) v += 0.25;
    }
    if (verify_prop1(kernel, g_y).holds) ++held;
  }
  double worst_gap = 0.0;
  for (std::size_t t = 0; t < 20; ++t) {
    Map2 g_y(8, 8);
    for (double& v : g_y.values) v = rng.normal();
    Map2 kernel(3, 3);
    kernel(rng.below(3), rng.below(3)) = rng.uniform(0.5, 2.0);
    const SnrReport rep = verify_prop1(kernel, g_y);
    worst_gap = std::max(worst_gap, std::abs(rep.snr_gx - rep.snr_gy));
  }

  const fs::path out = scratch("prop1");
  ExperimentCfg cfg;
  cfg.set("out", out.string());
  const RunResult run = run_verify_prop1(cfg);
  const auto rows = read_csv(out / "trials.csv");
  std::size_t runner_held = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) runner_held += rows[i][4] == "1";

  const bool ok = held == trials && worst_gap <= 1e-9 && run.exit_code == kExitOk &&
                  runner_held == rows.size() - 1;
  return {ok, std::to_string(held) + "/" + std::to_string(trials) + " trials hold, impulse gap " +
                  fmt("%.3g", worst_gap) + ", runner " + std::to_string(runner_held) + "/" +
                  std::to_string(rows.size() - 1)};
}

Outcome memory_claim() {
  bool ok = true;
  std::string detail;
  for (std::size_t r : {1u, 2u, 3u, 4u, 5u}) {
    Model m(3, 16, 16);
    m.conv(4, 3, 1).relu().conv(6, 3, 1).flatten().linear(2);
    m.init(1);
    m.set_active_layers(1, ConvMode::filtered(r));
    Rng rng(r);
    const std::size_t n = 3;
    m.forward(gftest::random_tensor({n, 3, 16, 16}, rng), true);
    const std::size_t expected = n * 4 * patch_count(16, r) * patch_count(16, r);
    ok = ok && m.stored_activation_elements() == expected;
  }
  const MemoryReport rep = memory_report(LayerCfg::same(4, 6, 16, 16, 3, 3), 4, 3);
  ok = ok && rep.stored_elements == 3u * 4 * 4 * 4 && rep.saving_fraction == 0.9375 &&
       rep.saving_fraction == 1.0 - 1.0 / 16.0;
  detail = "stored elements match N*C*ceil(H/r)*ceil(W/r) for r=1..5; saving(16x16, r=4) = " +
           format_real(rep.saving_fraction);
  return {ok, detail};
}

Outcome desk_training() {
  const fs::path root = scratch("desk");
  auto run = [&](const std::string& name, const std::string& mode, const std::string& layers) {
    ExperimentCfg cfg;
    cfg.set("out", (root / name).string());
    cfg.set("mode", mode);
    cfg.set("r", "2");
    cfg.set("layers", layers);
    run_train(cfg);
    return best_val_acc(root / name);
  };
  const double vanilla = run("vanilla", "vanilla", "2");
  const double filtered = run("filtered", "filtered", "2");
  const double baseline = run("classifier-only", "vanilla", "0");
  const bool close = std::abs(vanilla - filtered) <= 0.05;
  const bool above = vanilla - baseline >= 0.05 && filtered - baseline >= 0.05;
  return {close && above, "vanilla " + format_real(vanilla) + ", filtered(r=2) " + format_real(filtered) +
                              ", k=0 baseline " + format_real(baseline) +
                              (close ? "; gap ok" : "; gap > 5 points") +
                              (above ? "" : "; not >= 5 points above baseline")};
}

Outcome snr_trend() {
  const fs::path root = scratch("snr");
  ExperimentCfg cfg;
  cfg.set("out", (root / "train").string());
  cfg.set("epochs", "3");
  cfg.set("layers", "3");
  run_train(cfg);
  cfg.set("out", (root / "probe").string());
  cfg.set("checkpoint", (root / "train" / "model.ckpt").string());
  cfg.set("snr_r_list", "1,2,4");
  run_snr_probe(cfg);
  const auto rows = read_csv(root / "probe" / "snr.csv");
  bool ok = rows.size() == 1 + 3 * 3;
  for (std::size_t i = 1; ok && i + 2 < rows.size() + 0; i += 3) {
    const double s1 = std::stod(rows[i][2]);
    const double s2 = std::stod(rows[i + 1][2]);
    const double s4 = std::stod(rows[i + 2][2]);
    ok = ok && s1 >= s2 && s2 >= s4;
  }
  std::string detail = "per-layer snr over r=1,2,4:";
  for (std::size_t i = 1; i < rows.size(); ++i) {
    detail += (i % 3 == 1 ? " | L" + rows[i][0] + " " : " ") + rows[i][2];
  }
  return {ok, detail};
}

Outcome determinism() {
  const fs::path root = scratch("determinism");
  const fs::path cfg_path = root / "train.cfg";
  std::ofstream(cfg_path) << "command = train\nmode = filtered\nr = 2\nlayers = 2\nepochs = 3\n"
                             "per_class = 60\n";
  auto cli = [&](const std::string& args) {
    const std::string cmd = std::string(GRADFILTER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const fs::path ckpt = root / "a" / "train" / "model.ckpt";
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "--config " + cfg_path.string()},
      {"cost-sweep", "cost-sweep"},
      {"verify-prop1", "verify-prop1"},
      {"snr-probe", "snr-probe --set checkpoint=" + ckpt.string()},
      {"dc-ratio", "dc-ratio --set checkpoint=" + ckpt.string()},
  };
  bool ok = true;
  std::size_t files = 0;
  for (const auto& [name, args] : commands) {
    for (const char* side : {"a", "b"}) {
      ok = cli(args + " --out " + (root / side / name).string()) && ok;
    }
    for (const auto& entry : fs::directory_iterator(root / "a" / name)) {
      const fs::path other = root / "b" / name / entry.path().filename();
      if (entry.path().extension() == ".csv") {
        ++files;
        ok = ok && fs::exists(other) && slurp(entry.path()) == slurp(other);
      }
    }
  }
  return {ok && files > 0, std::to_string(files) + " CSV files compared across 5 commands"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "cost-model reproduction", 0.001, cost_model_reproduction},
      {2, "instrumentation identity", 10, instrumentation_identity},
      {3, "gradient correctness", 30, gradient_correctness},
      {4, "exact collapse", 10, exact_collapse},
      {5, "filtered-BP oracle equivalence", 10, oracle_equivalence},
      {6, "single-patch SNR inequality", 30, snr_inequality},
      {7, "memory claim", 1, memory_claim},
      {8, "desk-scale training", 300, desk_training},
      {9, "SNR probe monotone trend", 60, snr_trend},
      {10, "determinism", 300, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.3fs, budget %gs%s]\n", pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
