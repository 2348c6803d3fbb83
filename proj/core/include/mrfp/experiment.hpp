#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrfp/backbone.hpp"
#include "mrfp/dataset.hpp"
#include "mrfp/metrics.hpp"
#include "mrfp/mrfp.hpp"
#include "mrfp/spectral.hpp"
#include "mrfp/trainer.hpp"

namespace mrfp {

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, const std::string& origin, int line_no)
      : std::runtime_error(origin + ":" + std::to_string(line_no) + ": " + msg),
        line(line_no) {}
  int line;
};

struct DiagnosticsToggles {
  bool spectral = true;
  bool mmd = true;
  bool embeddings = true;

  friend bool operator==(const DiagnosticsToggles&, const DiagnosticsToggles&) = default;
};

struct DataConfig {
  int image_size = 64;
  int train_count = 128;
  int eval_count = 64;
  std::vector<std::string> sources;
  std::vector<std::string> targets;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

// A whole experiment in one flat, diff-friendly key=value file. Every seed is
// explicit; parse(render(c)) == c.
struct ExperimentConfig {
  std::string run_name = "run";
  std::string out_dir = "runs";
  DiagnosticsToggles diagnostics;
  PerturbConfig perturb;
  TrainConfig train;
  BackboneSpec backbone;
  std::uint64_t backbone_seed = 1;
  DataConfig data;
  std::vector<std::pair<std::string, DomainSpec>> domains;

  const DomainSpec& domain(const std::string& name) const;
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
std::string render_config(const ExperimentConfig& config);

struct RunOverrides {
  std::optional<std::uint64_t> seed;      // replaces perturb.master_seed and train.seed
  std::optional<int> iterations;          // replaces train.max_iter
  std::optional<std::string> out_dir;
  std::string device_hint = "cpu";        // accepted for interface parity; cpu only
};

struct RunReport {
  ExperimentConfig config;
  std::vector<std::pair<std::string, MIoUReport>> miou;  // source rows then targets
  double source_average = 0.0;
  double target_average = 0.0;
  std::vector<std::pair<std::string, double>> mmd_scores;
  std::vector<std::pair<std::string, std::array<double, 3>>> band_deltas;
  std::vector<double> loss_trace;
  double wall_seconds = 0.0;
  std::string device = "cpu";
  std::string run_dir;
};

// Generates data, trains, evaluates every target, runs the enabled
// diagnostics and writes the run directory (config echo, report, plot data).
// Reruns never overwrite: an existing run directory gets a numeric suffix.
RunReport run_experiment(const ExperimentConfig& config, const RunOverrides& ov = {});

RunReport read_report(const std::string& report_path);

// Aligned per-target mIoU rows with deltas against the first report.
std::string compare_table(const std::vector<RunReport>& reports);
std::string compare_csv(const std::vector<RunReport>& reports);

std::string inspect_report(const RunReport& report);

}  // namespace mrfp
