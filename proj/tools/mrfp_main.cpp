// Config-driven experiment runner for the feature-perturbation toolkit.
//
// Exit codes: 0 success, 2 configuration error, 3 training divergence.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mrfp/dataset.hpp"
#include "mrfp/experiment.hpp"
#include "mrfp/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<std::string> out;
  std::string device = "cpu";
};

int cmd_run(const std::string& config_path, const CommonFlags& flags) {
  const mrfp::ExperimentConfig config = mrfp::parse_config_file(config_path);
  mrfp::RunOverrides ov;
  ov.seed = flags.seed;
  ov.iterations = flags.iterations;
  ov.out_dir = flags.out;
  ov.device_hint = flags.device;
  const mrfp::RunReport report = mrfp::run_experiment(config, ov);
  std::cout << "run written to " << report.run_dir << '\n'
            << mrfp::inspect_report(report);
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& report_paths,
                const std::string& csv_out) {
  std::vector<mrfp::RunReport> reports;
  reports.reserve(report_paths.size());
  for (const auto& p : report_paths) reports.push_back(mrfp::read_report(p));
  std::cout << mrfp::compare_table(reports);
  if (!csv_out.empty()) {
    std::ofstream os(csv_out);
    if (!os) throw std::runtime_error("cannot write " + csv_out);
    os << mrfp::compare_csv(reports);
    std::cout << "csv written to " << csv_out << '\n';
  }
  return kExitOk;
}

int cmd_gen_data(const std::string& config_path, std::string domain_name, int count,
                 int size, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  const mrfp::ExperimentConfig config = mrfp::parse_config_file(config_path);
  if (domain_name.empty()) {
    if (config.domains.size() != 1)
      throw mrfp::ConfigError("config has several domains, pick one with --domain",
                              config_path, 0);
    domain_name = config.domains.front().first;
  }
  mrfp::DomainSpec spec = config.domain(domain_name);
  if (seed) spec.seed = *seed;
  const auto samples = mrfp::generate_dataset(spec, count, size, size);
  const std::string dir = out_dir.empty() ? domain_name : out_dir;
  mrfp::save_dataset(dir, spec, size, size, samples);
  std::cout << "wrote " << samples.size() << " samples to " << dir << '\n';
  return kExitOk;
}

int cmd_inspect(const std::string& report_path) {
  std::cout << mrfp::inspect_report(mrfp::read_report(report_path));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-resolution feature perturbation experiment runner"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string config_path, report_path, csv_out, domain_name, out_dir;
  std::vector<std::string> report_paths;
  int count = 64, size = 64;
  std::optional<std::uint64_t> gen_seed;

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--seed", flags.seed, "override master and training seeds");
  run->add_option("--iterations", flags.iterations, "override training iterations");
  run->add_option("--out", flags.out, "override output directory");
  run->add_option("--device", flags.device, "device hint (cpu only)");

  auto* compare = app.add_subcommand("compare", "tabulate reports against the first");
  compare->add_option("reports", report_paths, "report.txt paths")->required()->expected(-1);
  compare->add_option("--csv", csv_out, "also write a csv table");

  auto* gen = app.add_subcommand("gen-data", "generate a domain dataset on disk");
  gen->add_option("config", config_path, "config file holding the domain spec")->required();
  gen->add_option("--domain", domain_name, "domain name (defaults to the only one)");
  gen->add_option("--count", count, "sample count");
  gen->add_option("--size", size, "square image side");
  gen->add_option("--out", out_dir, "output directory (defaults to the domain name)");
  gen->add_option("--seed", gen_seed, "override the domain seed");

  auto* inspect = app.add_subcommand("inspect", "summarize a report");
  inspect->add_option("report", report_path, "report.txt path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, flags);
    if (compare->parsed()) return cmd_compare(report_paths, csv_out);
    if (gen->parsed())
      return cmd_gen_data(config_path, domain_name, count, size, out_dir, gen_seed);
    if (inspect->parsed()) return cmd_inspect(report_path);
  } catch (const mrfp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mrfp::TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
