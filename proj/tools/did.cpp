// Command-line front end: dataset generation, training, metric evaluation,
// ablation sweeps and latent-traversal image export.
//
// Exit codes: 0 success, 2 usage/validation, 3 I/O, 4 numerical abort,
// 5 checkpoint/dataset incompatibility.

#include <did/checkpoint.hpp>
#include <did/config.hpp>
#include <did/data.hpp>
#include <did/metrics.hpp>
#include <did/trainer.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct IncompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

// Written before any computation; holds everything needed to reproduce the run.
void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& resolved_config, const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ofstream out(dir + "/manifest.txt");
  if (!out) throw did::IoError("cannot write manifest in " + dir);
  out << "[run]\n"
      << "command = " << command << "\n"
      << "timestamp = " << timestamp_utc() << "\n";
  for (const auto& [k, v] : extra) out << k << " = " << v << "\n";
  out << "\n" << resolved_config;
  if (!out) throw did::IoError("manifest write failed in " + dir);
}

void check_compatible(const did::TrainState& st, const did::FactorDataset& ds) {
  if (ds.spec.pixels() != st.cfg.sizes.pixels)
    throw IncompatibilityError("dataset has " + std::to_string(ds.spec.pixels()) +
                               " pixels per image, checkpoint expects " +
                               std::to_string(st.cfg.sizes.pixels));
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_path, std::uint64_t seed) {
  (void)seed;  // the dataset is an exhaustive deterministic product
  const auto spec = did::factor_spec_from_text(did::load_config_file(spec_path));
  const auto ds = did::generate_dataset(spec);
  did::write_fds(out_path, ds);
  std::cout << "wrote " << out_path << ": " << ds.size() << " images, " << spec.height << "x"
            << spec.width << "x" << spec.channels << ", factors:";
  for (const auto& f : spec.factors) std::cout << " " << f.name << "(" << f.cardinality << ")";
  std::cout << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, bool resume) {
  const auto cfg = did::TrainConfig::from_text(did::load_config_file(config_path));
  const auto ds = did::read_fds(data_path);
  std::filesystem::create_directories(out_dir);

  const std::string ckpt_path = out_dir + "/checkpoint.didc";
  const std::string log_path = out_dir + "/train_log.csv";

  did::TrainState st;
  if (resume && std::filesystem::exists(ckpt_path)) {
    st = did::load_train_state(ckpt_path);
    // the config file may only extend/shorten the run; everything else must
    // match the checkpoint or the replayed randomness would diverge
    auto a = st.cfg, b = cfg;
    a.steps = b.steps = 0;
    if (a.to_text() != b.to_text())
      throw IncompatibilityError("resume: config differs from the checkpoint beyond steps");
    st.cfg.steps = cfg.steps;
    std::cout << "resuming from step " << st.step << "\n";
  } else {
    st = did::init_train_state(cfg);
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw did::IoError("cannot write " + log_path);
    log << did::train_log_header() << "\n";
  }
  check_compatible(st, ds);
  write_manifest(out_dir, "train", st.cfg.to_text(),
                 {{"data", data_path}, {"resume", resume ? "true" : "false"}});

  auto on_eval = [&](const did::TrainState& state, const did::TrainLogRow& row) {
    std::ofstream log(log_path, std::ios::app);
    log << did::train_log_csv_row(row) << "\n";
    if (!log) throw did::IoError("cannot append to " + log_path);
    did::save_checkpoint(ckpt_path, state);
  };
  did::train(st, ds, on_eval);
  did::save_checkpoint(ckpt_path, st);
  std::cout << "trained to step " << st.step << ", checkpoint at " << ckpt_path << "\n";
  return 0;
}

void write_metrics_files(const std::string& out_dir, const did::MetricReport& report) {
  std::ofstream m(out_dir + "/metrics.csv", std::ios::trunc);
  if (!m) throw did::IoError("cannot write metrics.csv in " + out_dir);
  m.precision(17);
  m << "name,value\n"
    << "mig," << report.mig << "\n"
    << "dci_d," << report.dci_d << "\n"
    << "sap," << report.sap << "\n"
    << "tc," << report.tc << "\n";

  std::ofstream s(out_dir + "/scores.csv", std::ios::trunc);
  if (!s) throw did::IoError("cannot write scores.csv in " + out_dir);
  s.precision(17);
  for (std::size_t j = 0; j < report.importance.d; ++j) {
    for (std::size_t f = 0; f < report.importance.k; ++f)
      s << (f ? "," : "") << report.importance.at(j, f);
    s << "\n";
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_eval_metrics(const std::string& ckpt_path, const std::string& data_path,
                     const std::string& out_dir, int bins) {
  auto st = did::load_train_state(ckpt_path);
  const auto ds = did::read_fds(data_path);
  check_compatible(st, ds);
  std::filesystem::create_directories(out_dir);
  write_manifest(out_dir, "eval-metrics", st.cfg.to_text(),
                 {{"checkpoint", ckpt_path}, {"data", data_path}, {"bins", std::to_string(bins)}});
  const auto report = did::eval_all(st.models.E, ds, bins);
  write_metrics_files(out_dir, report);
  std::cout << "mig=" << report.mig << " dci_d=" << report.dci_d << " sap=" << report.sap
            << " tc=" << report.tc << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_path,
               const std::string& k_values, std::size_t seeds, const std::string& out_dir) {
  auto cfg = did::TrainConfig::from_text(did::load_config_file(config_path));
  const auto ds = did::read_fds(data_path);

  std::vector<std::size_t> ks;
  std::istringstream in(k_values);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const long long v = std::stoll(tok);
    if (v < 0 || static_cast<std::size_t>(v) > cfg.sizes.latent_dim)
      throw did::ConfigError("ablate: k=" + tok + " outside [0, n=" +
                             std::to_string(cfg.sizes.latent_dim) + "]");
    ks.push_back(static_cast<std::size_t>(v));
  }
  if (ks.empty() || seeds < 1) throw did::ConfigError("ablate: need k values and seeds >= 1");
  std::sort(ks.begin(), ks.end());

  std::filesystem::create_directories(out_dir);
  write_manifest(out_dir, "ablate", cfg.to_text(),
                 {{"data", data_path}, {"k_values", k_values}, {"seeds", std::to_string(seeds)}});
  std::ofstream csv(out_dir + "/ablation.csv", std::ios::trunc);
  if (!csv) throw did::IoError("cannot write ablation.csv in " + out_dir);
  csv << "k,seed,mig,dci_d,sap\n";
  csv.precision(17);
  for (std::size_t k : ks) {
    for (std::size_t s = 0; s < seeds; ++s) {
      auto run_cfg = cfg;
      run_cfg.k_compare = k;
      run_cfg.seed = cfg.seed + s;
      auto st = did::init_train_state(run_cfg);
      check_compatible(st, ds);
      did::train(st, ds);
      const auto report = did::eval_all(st.models.E, ds, run_cfg.bins);
      csv << k << ',' << run_cfg.seed << ',' << report.mig << ',' << report.dci_d << ','
          << report.sap << "\n";
      csv.flush();
      std::cout << "k=" << k << " seed=" << run_cfg.seed << " mig=" << report.mig << "\n";
    }
  }
  if (!csv) throw did::IoError("ablation.csv write failed in " + out_dir);
  return 0;
}

int cmd_traverse(const std::string& ckpt_path, long axis, std::size_t steps,
                 const std::string& out_path) {
  auto st = did::load_train_state(ckpt_path);
  const std::size_t n = st.cfg.sizes.latent_dim;
  if (axis >= static_cast<long>(n))
    throw did::ConfigError("traverse: axis " + std::to_string(axis) + " out of range for n=" +
                           std::to_string(n));
  std::vector<std::size_t> axes;
  if (axis < 0)
    for (std::size_t a = 0; a < n; ++a) axes.push_back(a);
  else
    axes.push_back(static_cast<std::size_t>(axis));

  // cell geometry: the checkpoint only knows pixel count, render square images
  const std::size_t pixels = st.cfg.sizes.pixels;
  const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(double(pixels))));
  if (side * side != pixels)
    throw did::ConfigError("traverse: non-square image layout unsupported");

  const std::size_t width = steps * side + (steps - 1);
  const std::size_t height = axes.size() * side + (axes.size() - 1);
  std::vector<std::uint8_t> canvas(width * height, 255);  // separators stay white

  const std::vector<double> base(n, 0.0);
  for (std::size_t r = 0; r < axes.size(); ++r) {
    const auto codes = did::traversal_codes(base, axes[r], steps);
    std::vector<double> flat;
    for (const auto& c : codes) flat.insert(flat.end(), c.begin(), c.end());
    const auto imgs = did::generate_raw(st.models.G, flat, steps);
    for (std::size_t col = 0; col < steps; ++col) {
      const std::size_t x0 = col * (side + 1), y0 = r * (side + 1);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double v = imgs[col * pixels + y * side + x];
          canvas[(y0 + y) * width + x0 + x] =
              static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
    }
  }

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw did::IoError("cannot write " + out_path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(canvas.data()),
            static_cast<std::streamsize>(canvas.size()));
  if (!out) throw did::IoError("pgm write failed: " + out_path);
  std::cout << "wrote " << out_path << " (" << width << "x" << height << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factor-controlled GAN training and disentanglement evaluation"};
  app.require_subcommand(1);

  std::string spec_path, config_path, data_path, ckpt_path, out_path, k_values = "0,2,4,6";
  std::uint64_t seed = 1;
  std::size_t seeds = 3, steps = 8;
  long axis = -1;
  int bins = 20;
  bool resume = false;

  auto* gen = app.add_subcommand("gen-data", "generate a factor dataset (FDS)");
  gen->add_option("--spec", spec_path, "dataset spec file")->required();
  gen->add_option("--out", out_path, "output .fds path")->required();
  gen->add_option("--seed", seed, "unused; accepted for interface stability");

  auto* train = app.add_subcommand("train", "train models on a dataset");
  train->add_option("--config", config_path, "training config file")->required();
  train->add_option("--data", data_path, "input .fds dataset")->required();
  train->add_option("--out", out_path, "output directory")->required();
  train->add_flag("--resume", resume, "continue from the directory's checkpoint");

  auto* evalm = app.add_subcommand("eval-metrics", "disentanglement metrics for a checkpoint");
  evalm->add_option("--checkpoint", ckpt_path, "input .didc checkpoint")->required();
  evalm->add_option("--data", data_path, "input .fds dataset")->required();
  evalm->add_option("--out", out_path, "output directory")->required();
  evalm->add_option("--bins", bins, "quantile bins");

  auto* ablate = app.add_subcommand("ablate", "train a (k_compare, seed) grid");
  ablate->add_option("--config", config_path, "training config file")->required();
  ablate->add_option("--data", data_path, "input .fds dataset")->required();
  ablate->add_option("--k-values", k_values, "comma-separated k_compare values");
  ablate->add_option("--seeds", seeds, "seeds per k value");
  ablate->add_option("--out", out_path, "output directory")->required();

  auto* trav = app.add_subcommand("traverse", "latent traversal image grid (PGM)");
  trav->add_option("--checkpoint", ckpt_path, "input .didc checkpoint")->required();
  trav->add_option("--axis", axis, "single axis; default all axes");
  trav->add_option("--steps", steps, "traversal steps per axis");
  trav->add_option("--out", out_path, "output .pgm path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(spec_path, out_path, seed);
    if (train->parsed()) return cmd_train(config_path, data_path, out_path, resume);
    if (evalm->parsed()) return cmd_eval_metrics(ckpt_path, data_path, out_path, bins);
    if (ablate->parsed()) return cmd_ablate(config_path, data_path, k_values, seeds, out_path);
    if (trav->parsed()) return cmd_traverse(ckpt_path, axis, steps, out_path);
  } catch (const did::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const IncompatibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const did::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {  // config/format/validation
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
