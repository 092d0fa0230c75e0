#include "starsee/experiments.hpp"
#include "starsee/optimizer.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace starsee;

namespace {

int cmd_run(const std::string& config, const std::string& out, int seeds, const std::string& profile, int workers) {
  exp::ExperimentConfig cfg = exp::load_config(config);
  if (!profile.empty()) exp::apply_profile(cfg, profile);
  if (seeds > 0) {
    cfg.seeds.clear();
    for (int s = 1; s <= seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (!out.empty()) cfg.out_dir = out;
  if (workers > 0) cfg.workers = workers;
  cfg.validate();
  const std::size_t total = cfg.runs.size() * cfg.values.size() * cfg.seeds.size();
  std::size_t n = 0;
  const auto rows = exp::run_campaign(cfg, [&](const exp::ResultRow& r) {
    std::printf("[%zu] %-7s %s=%g seed=%llu  SEE %.5f  SSR %.4f  it %d%s%s\n", ++n, r.protocol.c_str(),
                r.axis.c_str(), r.value, static_cast<unsigned long long>(r.seed), r.see, r.ssr, r.iterations,
                r.feasible ? "" : "  infeasible", r.converged || !r.feasible ? "" : "  not converged");
    std::fflush(stdout);
  });
  std::printf("%zu new rows, %zu total of %zu; results in %s\n", n, rows.size(), total, cfg.out_dir.c_str());
  exp::write_summary(rows, cfg.out_dir);
  return 0;
}

int cmd_summarize(const std::string& csv, const std::string& out) {
  const auto rows = exp::read_csv(csv);
  const std::string dir = out.empty() ? std::filesystem::path(csv).parent_path().string() : out;
  exp::write_summary(rows, dir.empty() ? "." : dir);
  std::printf("%-8s %12s %5s %5s %12s %12s\n", "protocol", "value", "runs", "feas", "mean SEE", "SE");
  for (const auto& e : exp::summarize(rows))
    std::printf("%-8s %12g %5d %5d %12.6g %12.3g\n", e.protocol.c_str(), e.value, e.runs, e.feasible, e.mean, e.se);
  const auto amp = exp::amplitude_report(rows);
  if (amp.rows > 0)
    std::printf("amplitudes over %d converged ES runs: mean beta_r %.4f, mean beta_t %.4f\n", amp.rows, amp.mean_r,
                amp.mean_t);
  return 0;
}

int cmd_complexity(int N, int M, int jr, int jt) {
  const ComplexityEstimate c = complexity_estimate(N, M, jr, jt);
  std::printf("variables   n1 %d  n2 %d  n3 %d\n", c.n1, c.n2, c.n3);
  std::printf("orders      a1 %d  a3 %d", c.a1, c.a3);
  for (std::size_t j = 1; j < c.a2.size(); ++j) std::printf("  a2[%zu] %d", j, c.a2[j]);
  std::printf("\nsigma       %d\n", c.sigma);
  std::printf("%-26s %6s %6s\n", "LMI rows", "order", "count");
  for (const auto& r : c.rows) std::printf("%-26s %6d %6d\n", r.label.c_str(), r.size, r.count);
  std::printf("f1 %.6g  f2 %.6g  f3 %.6g\n", c.f1, c.f2, c.f3);
  std::printf("O_alpha %.6g  O_F %.6g  O_Phi %.6g\n", c.o_alpha, c.o_f, c.o_phi);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust secrecy energy efficiency optimizer for STAR-RIS NOMA downlinks"};
  app.require_subcommand(1);

  std::string config, out, profile;
  int seeds = 0, workers = 0;
  auto* run = app.add_subcommand("run", "Run a campaign from a config file");
  run->add_option("config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (overrides run.out)");
  run->add_option("--seeds", seeds, "Use seeds 1..N")->check(CLI::PositiveNumber);
  run->add_option("--profile", profile, "Preset sizes")->check(CLI::IsMember({"desk", "full"}));
  run->add_option("--workers", workers, "Parallel runs")->check(CLI::PositiveNumber);

  std::string csv, sum_out;
  auto* sum = app.add_subcommand("summarize", "Aggregate a results file and draw plots");
  sum->add_option("csv", csv, "results.csv")->required()->check(CLI::ExistingFile);
  sum->add_option("--out", sum_out, "Directory for summary files (default: next to the csv)");

  int N = 0, M = 0, jr = 0, jt = 0;
  auto* cx = app.add_subcommand("complexity", "Print block sizes and complexity orders");
  cx->add_option("N", N)->required()->check(CLI::PositiveNumber);
  cx->add_option("M", M)->required()->check(CLI::PositiveNumber);
  cx->add_option("Jr", jr)->required()->check(CLI::NonNegativeNumber);
  cx->add_option("Jt", jt)->required()->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, seeds, profile, workers);
    if (*sum) return cmd_summarize(csv, sum_out);
    if (*cx) return cmd_complexity(N, M, jr, jt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
