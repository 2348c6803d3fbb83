#include "mrfp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mrfp/rng.hpp"

namespace mrfp {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(trim(part));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

const DomainSpec& ExperimentConfig::domain(const std::string& name) const {
  for (const auto& [n, d] : domains)
    if (n == name) return d;
  throw std::invalid_argument("config: unknown domain '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (run_name.empty()) throw std::invalid_argument("config: empty run name");
  perturb.validate();
  train.validate();
  backbone.validate();
  if (data.image_size < 8) throw std::invalid_argument("config: image_size < 8");
  if (data.train_count < 1 || data.eval_count < 1)
    throw std::invalid_argument("config: train_count/eval_count must be >= 1");
  if (data.sources.empty()) throw std::invalid_argument("config: no source domains");
  for (const auto& s : data.sources) domain(s).validate();
  for (const auto& t : data.targets) domain(t).validate();
}

namespace {

struct Parser {
  std::string origin;
  int line_no = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(msg, origin, line_no);
  }

  double num(const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) fail("trailing characters in number '" + v + "'");
      return d;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a number, got '" + v + "'");
    }
  }

  int integer(const std::string& v) const {
    const double d = num(v);
    if (d != std::floor(d)) fail("expected an integer, got '" + v + "'");
    return static_cast<int>(d);
  }

  std::uint64_t seed(const std::string& v) const {
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
      fail("expected a seed, got '" + v + "'");
    }
  }

  bool boolean(const std::string& v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail("expected true/false, got '" + v + "'");
  }

  std::array<double, 3> triple(const std::string& v) const {
    const auto parts = split(v, ',');
    if (parts.size() != 3) fail("expected three comma-separated numbers");
    return {num(parts[0]), num(parts[1]), num(parts[2])};
  }
};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig c;
  c.domains.clear();
  Parser p{origin, 0};
  std::string section;
  DomainSpec* domain = nullptr;

  std::stringstream ss(text);
  std::string raw;
  while (std::getline(ss, raw)) {
    p.line_no++;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') p.fail("unterminated section header");
      section = line.substr(1, line.size() - 2);
      domain = nullptr;
      if (section.rfind("domain:", 0) == 0) {
        const std::string name = trim(section.substr(7));
        if (name.empty()) p.fail("domain section needs a name");
        c.domains.emplace_back(name, DomainSpec{});
        domain = &c.domains.back().second;
        domain->name = name;
      } else if (section != "run" && section != "perturb" && section != "train" &&
                 section != "backbone" && section != "data") {
        p.fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) p.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (section == "run") {
      if (key == "name") c.run_name = val;
      else if (key == "out") c.out_dir = val;
      else if (key == "diagnostics") {
        c.diagnostics = {};
        c.diagnostics.spectral = c.diagnostics.mmd = c.diagnostics.embeddings = false;
        for (const auto& d : split(val, ',')) {
          if (d == "spectral") c.diagnostics.spectral = true;
          else if (d == "mmd") c.diagnostics.mmd = true;
          else if (d == "embeddings") c.diagnostics.embeddings = true;
          else if (d == "none") {}
          else p.fail("unknown diagnostic '" + d + "'");
        }
      } else p.fail("unknown key '" + key + "' in [run]");
    } else if (section == "perturb") {
      if (key == "variant") {
        try {
          c.perturb.variant = parse_variant(val);
        } catch (const std::exception& e) {
          p.fail(e.what());
        }
      } else if (key == "p_hrfp") c.perturb.p_hrfp = p.num(val);
      else if (key == "p_np") c.perturb.p_np = p.num(val);
      else if (key == "osf") c.perturb.osf = p.num(val);
      else if (key == "rgn_std") c.perturb.rgn_std = p.num(val);
      else if (key == "np_mean") c.perturb.np_mean = p.num(val);
      else if (key == "np_std") c.perturb.np_std = p.num(val);
      else if (key == "bn_init_std") c.perturb.bn_init_std = p.num(val);
      else if (key == "hrfp_depth") c.perturb.hrfp_depth = p.integer(val);
      else if (key == "hrfp_kernel") c.perturb.hrfp_kernel = p.integer(val);
      else if (key == "master_seed") c.perturb.master_seed = p.seed(val);
      else p.fail("unknown key '" + key + "' in [perturb]");
    } else if (section == "train") {
      if (key == "lr0") c.train.lr0 = p.num(val);
      else if (key == "momentum") c.train.momentum = p.num(val);
      else if (key == "weight_decay") c.train.weight_decay = p.num(val);
      else if (key == "poly_power") c.train.poly_power = p.num(val);
      else if (key == "max_iter") c.train.max_iter = p.integer(val);
      else if (key == "batch_size") c.train.batch_size = p.integer(val);
      else if (key == "augment") c.train.augment = p.boolean(val);
      else if (key == "seed") c.train.seed = p.seed(val);
      else p.fail("unknown key '" + key + "' in [train]");
    } else if (section == "backbone") {
      if (key == "widths") {
        c.backbone.stage_widths.clear();
        for (const auto& wtext : split(val, ','))
          c.backbone.stage_widths.push_back(p.integer(wtext));
      } else if (key == "num_classes") c.backbone.num_classes = p.integer(val);
      else if (key == "instance_norms") c.backbone.with_instance_norms = p.boolean(val);
      else if (key == "seed") c.backbone_seed = p.seed(val);
      else p.fail("unknown key '" + key + "' in [backbone]");
    } else if (section == "data") {
      if (key == "image_size") c.data.image_size = p.integer(val);
      else if (key == "train_count") c.data.train_count = p.integer(val);
      else if (key == "eval_count") c.data.eval_count = p.integer(val);
      else if (key == "sources") c.data.sources = split(val, ',');
      else if (key == "targets") c.data.targets = split(val, ',');
      else p.fail("unknown key '" + key + "' in [data]");
    } else if (domain) {
      if (key == "texture_family") domain->texture_family = p.integer(val);
      else if (key == "freq_lo") domain->texture_freq_lo = p.num(val);
      else if (key == "freq_hi") domain->texture_freq_hi = p.num(val);
      else if (key == "texture_amp") domain->texture_amp = p.num(val);
      else if (key == "color_mean_shift") domain->color_mean_shift = p.triple(val);
      else if (key == "color_std_scale") domain->color_std_scale = p.triple(val);
      else if (key == "palette_shift") domain->palette_shift = p.num(val);
      else if (key == "corruption") {
        try {
          domain->corruption = parse_corruption(val);
        } catch (const std::exception& e) {
          p.fail(e.what());
        }
      } else if (key == "corruption_strength") domain->corruption_strength = p.num(val);
      else if (key == "seed") domain->seed = p.seed(val);
      else p.fail("unknown key '" + key + "' in [domain:" + domain->name + "]");
    } else {
      p.fail("key outside any section");
    }
  }

  p.line_no = 0;
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), origin, 0);
  }
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file", path, 0);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[run]\n"
     << "name = " << c.run_name << '\n'
     << "out = " << c.out_dir << '\n';
  std::vector<std::string> diags;
  if (c.diagnostics.spectral) diags.push_back("spectral");
  if (c.diagnostics.mmd) diags.push_back("mmd");
  if (c.diagnostics.embeddings) diags.push_back("embeddings");
  os << "diagnostics = " << (diags.empty() ? "none" : join(diags, ',')) << '\n';

  os << "\n[perturb]\n"
     << "variant = " << to_string(c.perturb.variant) << '\n'
     << "p_hrfp = " << fmt(c.perturb.p_hrfp) << '\n'
     << "p_np = " << fmt(c.perturb.p_np) << '\n'
     << "osf = " << fmt(c.perturb.osf) << '\n'
     << "rgn_std = " << fmt(c.perturb.rgn_std) << '\n'
     << "np_mean = " << fmt(c.perturb.np_mean) << '\n'
     << "np_std = " << fmt(c.perturb.np_std) << '\n'
     << "bn_init_std = " << fmt(c.perturb.bn_init_std) << '\n'
     << "hrfp_depth = " << c.perturb.hrfp_depth << '\n'
     << "hrfp_kernel = " << c.perturb.hrfp_kernel << '\n'
     << "master_seed = " << c.perturb.master_seed << '\n';

  os << "\n[train]\n"
     << "lr0 = " << fmt(c.train.lr0) << '\n'
     << "momentum = " << fmt(c.train.momentum) << '\n'
     << "weight_decay = " << fmt(c.train.weight_decay) << '\n'
     << "poly_power = " << fmt(c.train.poly_power) << '\n'
     << "max_iter = " << c.train.max_iter << '\n'
     << "batch_size = " << c.train.batch_size << '\n'
     << "augment = " << (c.train.augment ? "true" : "false") << '\n'
     << "seed = " << c.train.seed << '\n';

  os << "\n[backbone]\n";
  std::vector<std::string> widths;
  for (int w : c.backbone.stage_widths) widths.push_back(std::to_string(w));
  os << "widths = " << join(widths, ',') << '\n'
     << "num_classes = " << c.backbone.num_classes << '\n'
     << "instance_norms = " << (c.backbone.with_instance_norms ? "true" : "false") << '\n'
     << "seed = " << c.backbone_seed << '\n';

  os << "\n[data]\n"
     << "image_size = " << c.data.image_size << '\n'
     << "train_count = " << c.data.train_count << '\n'
     << "eval_count = " << c.data.eval_count << '\n'
     << "sources = " << join(c.data.sources, ',') << '\n'
     << "targets = " << join(c.data.targets, ',') << '\n';

  for (const auto& [name, d] : c.domains) {
    os << "\n[domain:" << name << "]\n"
       << "texture_family = " << d.texture_family << '\n'
       << "freq_lo = " << fmt(d.texture_freq_lo) << '\n'
       << "freq_hi = " << fmt(d.texture_freq_hi) << '\n'
       << "texture_amp = " << fmt(d.texture_amp) << '\n'
       << "color_mean_shift = " << fmt(d.color_mean_shift[0]) << ','
       << fmt(d.color_mean_shift[1]) << ',' << fmt(d.color_mean_shift[2]) << '\n'
       << "color_std_scale = " << fmt(d.color_std_scale[0]) << ','
       << fmt(d.color_std_scale[1]) << ',' << fmt(d.color_std_scale[2]) << '\n'
       << "palette_shift = " << fmt(d.palette_shift) << '\n'
       << "corruption = " << to_string(d.corruption) << '\n'
       << "corruption_strength = " << fmt(d.corruption_strength) << '\n'
       << "seed = " << d.seed << '\n';
  }
  return os.str();
}

namespace {

constexpr std::uint64_t kTagDiagStack = 0x64737461;
constexpr std::uint64_t kTagDiagNp = 0x64737462;

std::string unique_run_dir(const std::string& out_dir, const std::string& name) {
  fs::create_directories(out_dir);
  fs::path base = fs::path(out_dir) / name;
  if (!fs::exists(base)) return base.string();
  for (int i = 1;; ++i) {
    fs::path candidate = fs::path(out_dir) / (name + "_" + std::to_string(i));
    if (!fs::exists(candidate)) return candidate.string();
  }
}

Tensor concat_batches(const std::vector<Tensor>& parts) {
  int n = 0;
  for (const auto& t : parts) n += t.n();
  const Tensor& f = parts.front();
  Tensor out(n, f.c(), f.h(), f.w());
  double* dst = out.data();
  for (const auto& t : parts) {
    std::copy(t.data(), t.data() + t.size(), dst);
    dst += t.size();
  }
  return out;
}

// Clean tap activations over a sample set, batched through the backbone.
Tensor tap_features(WrappedModel& model, const std::vector<Sample>& samples,
                    const std::string& tap, int max_count, int batch_size = 8) {
  const int count = std::min<int>(max_count, static_cast<int>(samples.size()));
  std::vector<Tensor> parts;
  for (int begin = 0; begin < count;) {
    const int end = std::min(count, begin + batch_size);
    const int h = samples[begin].mask.h, w = samples[begin].mask.w;
    Tensor images(end - begin, 3, h, w);
    for (int i = begin; i < end; ++i)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            images.at(i - begin, c, y, x) = samples[i].image.at(0, c, y, x);
    auto fwd = model.backbone().forward(Var::constant(images), false, nullptr);
    parts.push_back(fwd.taps.at(tap).value());
    begin = end;
  }
  return concat_batches(parts);
}

void write_report_file(const RunReport& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report " + path);
  os << "# mrfp run report\n";
  os << "name: " << r.config.run_name << '\n';
  os << "device: " << r.device << '\n';
  os << "wall_seconds: " << fmt(r.wall_seconds) << '\n';
  os << "[miou]\n";
  for (const auto& [name, rep] : r.miou) {
    os << name << " mean " << fmt(rep.mean_iou) << " per_class";
    for (double v : rep.per_class_iou) os << ' ' << fmt(v);
    os << '\n';
  }
  os << "source_average: " << fmt(r.source_average) << '\n';
  os << "target_average: " << fmt(r.target_average) << '\n';
  os << "[mmd]\n";
  for (const auto& [name, score] : r.mmd_scores) os << name << ": " << fmt(score) << '\n';
  os << "[band_delta]\n";
  for (const auto& [name, d] : r.band_deltas)
    os << name << ": " << fmt(d[0]) << ' ' << fmt(d[1]) << ' ' << fmt(d[2]) << '\n';
  os << "[loss_trace]\n";
  for (double v : r.loss_trace) os << fmt(v) << '\n';
  os << "[config]\n";
  os << render_config(r.config);
  os << "[end]\n";
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config_in, const RunOverrides& ov) {
  ExperimentConfig config = config_in;
  if (ov.seed) {
    config.perturb.master_seed = *ov.seed;
    config.train.seed = *ov.seed;
  }
  if (ov.iterations) config.train.max_iter = *ov.iterations;
  if (ov.out_dir) config.out_dir = *ov.out_dir;
  config.validate();

  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.config = config;
  report.device = ov.device_hint;

  const int size = config.data.image_size;
  std::vector<std::vector<Sample>> train_sets;
  std::vector<std::pair<std::string, std::vector<Sample>>> eval_sets;  // sources first
  for (const auto& name : config.data.sources) {
    const DomainSpec& d = config.domain(name);
    train_sets.push_back(generate_dataset(d, config.data.train_count, size, size));
    eval_sets.emplace_back("source:" + name,
                           generate_dataset(d, config.data.eval_count, size, size,
                                            config.data.train_count));
  }
  const std::size_t n_sources = eval_sets.size();
  for (const auto& name : config.data.targets)
    eval_sets.emplace_back("target:" + name,
                           generate_dataset(config.domain(name), config.data.eval_count,
                                            size, size));

  Backbone backbone(config.backbone, config.backbone_seed);
  WrappedModel model = WrappedModel::wrap(std::move(backbone), config.perturb);
  const TrainResult tr = train(model, train_sets, config.train);
  report.loss_trace = tr.loss_trace;

  double src_sum = 0.0, tgt_sum = 0.0;
  for (std::size_t i = 0; i < eval_sets.size(); ++i) {
    const MIoUReport rep = evaluate(model, eval_sets[i].second, config.train.batch_size);
    report.miou.emplace_back(eval_sets[i].first, rep);
    if (i < n_sources) src_sum += rep.mean_iou;
    else tgt_sum += rep.mean_iou;
  }
  report.source_average = n_sources ? src_sum / n_sources : 0.0;
  const std::size_t n_targets = eval_sets.size() - n_sources;
  report.target_average = n_targets ? tgt_sum / n_targets : 0.0;

  const std::string run_dir = unique_run_dir(config.out_dir, config.run_name);
  fs::create_directories(run_dir);
  report.run_dir = run_dir;

  if (config.diagnostics.spectral) {
    // stage-0 features of a source eval batch, clean vs each perturbation
    const auto& src_eval = eval_sets.front().second;
    const Tensor f0 = tap_features(model, src_eval, "encoder.stage0", 8);
    const BandEnergyReport clean = band_energy(f0);

    const StyleCoeffs coeffs = sample_coeffs(
        f0.n(), f0.c(), config.perturb.np_mean, config.perturb.np_std,
        derive_seed(config.perturb.master_seed, 0, kTagDiagNp));
    const Tensor f_np = np_plus(f0, coeffs, channel_stats(f0));
    report.band_deltas.emplace_back("np_plus", band_delta(clean, band_energy(f_np)));

    const RandomStack stack = sample_stack(
        model.stack_spec(), derive_seed(config.perturb.master_seed, 0, kTagDiagStack));
    const HrfpOut h = hrfp_forward(Var::constant(f0), stack);
    const Tensor f_h = add(Var::constant(f0), h.o1).value();
    report.band_deltas.emplace_back("hrfp", band_delta(clean, band_energy(f_h)));

    std::ofstream os(fs::path(run_dir) / "band_deltas.txt");
    os << "# relative band-energy change vs clean stage-0 features\n"
       << "# perturbation low mid high\n";
    for (const auto& [name, d] : report.band_deltas)
      os << name << ' ' << fmt(d[0]) << ' ' << fmt(d[1]) << ' ' << fmt(d[2]) << '\n';
  }

  if (config.diagnostics.mmd || config.diagnostics.embeddings) {
    const auto& src_eval = eval_sets.front().second;
    const Tensor src_feat = tap_features(model, src_eval, "encoder.final", 64);
    const StatEmbedding src_emb = stat_embedding(src_feat);
    if (config.diagnostics.embeddings) {
      fs::create_directories(fs::path(run_dir) / "embeddings");
      export_embedding(src_emb, (fs::path(run_dir) / "embeddings" /
                                 (eval_sets.front().first + ".txt").substr(7))
                                    .string());
    }
    for (std::size_t i = n_sources; i < eval_sets.size(); ++i) {
      const Tensor tf = tap_features(model, eval_sets[i].second, "encoder.final", 64);
      const StatEmbedding temb = stat_embedding(tf);
      const std::string tname = eval_sets[i].first.substr(7);
      if (config.diagnostics.mmd)
        report.mmd_scores.emplace_back(tname, mmd(src_emb, temb));
      if (config.diagnostics.embeddings)
        export_embedding(temb,
                         (fs::path(run_dir) / "embeddings" / (tname + ".txt")).string());
    }
    if (config.diagnostics.mmd) {
      std::ofstream os(fs::path(run_dir) / "mmd_scores.txt");
      os << "# channel-statistics MMD, source vs target\n";
      for (const auto& [name, score] : report.mmd_scores)
        os << name << ' ' << fmt(score) << '\n';
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream os(fs::path(run_dir) / "config.ini");
    os << render_config(config);
  }
  write_report_file(report, (fs::path(run_dir) / "report.txt").string());
  return report;
}

RunReport read_report(const std::string& report_path) {
  std::ifstream is(report_path);
  if (!is) throw std::runtime_error("cannot open report " + report_path);
  RunReport r;
  r.run_dir = fs::path(report_path).parent_path().string();

  std::string line, section;
  std::string config_text;
  while (std::getline(is, line)) {
    if (line == "[end]") break;
    if (!line.empty() && line.front() == '[' && line.back() == ']' &&
        section != "config") {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section == "config") {
      config_text += line + '\n';
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (section.empty()) {
      if (line.rfind("device: ", 0) == 0) r.device = line.substr(8);
      else if (line.rfind("wall_seconds: ", 0) == 0) r.wall_seconds = std::stod(line.substr(14));
      continue;
    }
    if (section == "miou") {
      if (line.rfind("source_average: ", 0) == 0) {
        r.source_average = std::stod(line.substr(16));
        continue;
      }
      if (line.rfind("target_average: ", 0) == 0) {
        r.target_average = std::stod(line.substr(16));
        continue;
      }
      std::stringstream ss(line);
      std::string name, tag;
      MIoUReport rep;
      ss >> name >> tag >> rep.mean_iou >> tag;
      double v = 0.0;
      while (ss >> v) rep.per_class_iou.push_back(v);
      r.miou.emplace_back(name, rep);
    } else if (section == "mmd") {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      r.mmd_scores.emplace_back(trim(line.substr(0, colon)),
                                std::stod(line.substr(colon + 1)));
    } else if (section == "band_delta") {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::stringstream ss(line.substr(colon + 1));
      std::array<double, 3> d{};
      ss >> d[0] >> d[1] >> d[2];
      r.band_deltas.emplace_back(trim(line.substr(0, colon)), d);
    } else if (section == "loss_trace") {
      r.loss_trace.push_back(std::stod(line));
    }
  }
  r.config = parse_config_text(config_text, report_path + " [embedded config]");
  return r;
}

namespace {

std::vector<std::string> target_names(const RunReport& r) {
  std::vector<std::string> out;
  for (const auto& [name, rep] : r.miou)
    if (name.rfind("target:", 0) == 0) out.push_back(name.substr(7));
  return out;
}

double miou_of(const RunReport& r, const std::string& full_name) {
  for (const auto& [name, rep] : r.miou)
    if (name == full_name) return rep.mean_iou;
  throw std::invalid_argument("report lacks row " + full_name);
}

}  // namespace

std::string compare_table(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("compare: no reports");
  const auto targets = target_names(reports.front());
  for (const auto& r : reports)
    if (target_names(r) != targets)
      throw std::invalid_argument("compare: reports have different target sets");

  std::ostringstream os;
  os << "run";
  os << "\tsource_avg";
  for (const auto& t : targets) os << '\t' << t;
  os << "\ttarget_avg\n";
  char buf[64];
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const RunReport& r = reports[i];
    os << r.config.run_name;
    std::snprintf(buf, sizeof(buf), "\t%.4f", r.source_average);
    os << buf;
    for (const auto& t : targets) {
      const double v = miou_of(r, "target:" + t);
      if (i == 0) std::snprintf(buf, sizeof(buf), "\t%.4f", v);
      else
        std::snprintf(buf, sizeof(buf), "\t%.4f (%+.4f)", v,
                      v - miou_of(reports.front(), "target:" + t));
      os << buf;
    }
    if (i == 0) std::snprintf(buf, sizeof(buf), "\t%.4f", r.target_average);
    else
      std::snprintf(buf, sizeof(buf), "\t%.4f (%+.4f)", r.target_average,
                    r.target_average - reports.front().target_average);
    os << buf << '\n';
  }
  return os.str();
}

std::string compare_csv(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("compare: no reports");
  const auto targets = target_names(reports.front());
  for (const auto& r : reports)
    if (target_names(r) != targets)
      throw std::invalid_argument("compare: reports have different target sets");
  std::ostringstream os;
  os << "run,source_avg";
  for (const auto& t : targets) os << ',' << t;
  os << ",target_avg,delta_target_avg\n";
  for (const auto& r : reports) {
    os << r.config.run_name << ',' << fmt(r.source_average);
    for (const auto& t : targets) os << ',' << fmt(miou_of(r, "target:" + t));
    os << ',' << fmt(r.target_average) << ','
       << fmt(r.target_average - reports.front().target_average) << '\n';
  }
  return os.str();
}

std::string inspect_report(const RunReport& r) {
  std::ostringstream os;
  os << "run: " << r.config.run_name << '\n'
     << "variant: " << to_string(r.config.perturb.variant) << '\n'
     << "iterations: " << r.config.train.max_iter << '\n'
     << "wall_seconds: " << r.wall_seconds << '\n'
     << "source_average: " << r.source_average << '\n'
     << "target_average: " << r.target_average << '\n';
  for (const auto& [name, rep] : r.miou) os << "  " << name << " mIoU " << rep.mean_iou << '\n';
  for (const auto& [name, score] : r.mmd_scores) os << "  mmd " << name << " " << score << '\n';
  if (!r.loss_trace.empty())
    os << "final_loss: " << r.loss_trace.back() << " (over " << r.loss_trace.size()
       << " iterations)\n";
  return os.str();
}

}  // namespace mrfp
