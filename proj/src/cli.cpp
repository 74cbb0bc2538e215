#include "pirnn/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pirnn/config.hpp"
#include "pirnn/errors.hpp"
#include "pirnn/svg.hpp"
#include "pirnn/training.hpp"

namespace pirnn::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "flat key = value config file");
  app->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  app->add_option("--seed", c.seed, "seed for this subcommand");
  app->add_option("--out", c.out_dir, "output directory (default: $PIRNN_OUT_DIR or .)");
}

Settings load_settings(const Common& c) {
  Settings s;
  if (!c.config.empty()) apply_config_file(s, c.config);
  for (const auto& o : c.overrides) apply_override(s, o);
  return s;
}

fs::path out_dir(const Common& c) {
  fs::path dir = c.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("PIRNN_OUT_DIR");
    dir = env && *env ? fs::path(env) : fs::path(".");
  }
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  f << text;
}

struct ArmOutputs {
  std::string name;
  std::vector<Scene> scenes;
  EvalResult result;
};

EvalResult eval_arm(const std::string& checkpoint, const std::vector<Scene>& scenes, const MetricsConfig& metrics,
                    std::string& name) {
  if (checkpoint.empty()) {
    name = "raw";
    return evaluate(nullptr, nullptr, scenes, metrics);
  }
  LoadedModel lm = load_model(checkpoint);
  name = lm.model->kind();
  return evaluate(lm.model.get(), &lm.params, scenes, metrics);
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& s, std::size_t T) {
  if (s.empty()) return {0, T};
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) {
      const std::size_t t = std::stoul(s);
      return {t, t + 1};
    }
    const std::size_t a = colon == 0 ? 0 : std::stoul(s.substr(0, colon));
    const std::size_t b = colon + 1 == s.size() ? T : std::stoul(s.substr(colon + 1));
    return {a, b};
  } catch (const std::exception&) {
    throw ConfigError("--frames expects a:b, got '" + s + "'");
  }
}

std::vector<std::string> attention_labels(std::size_t m_x, std::size_t m_h) {
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < m_x; ++i) cols.push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < m_h; ++i) cols.push_back("h" + std::to_string(i));
  return cols;
}

std::string matrix_csv(const Tensor& m, const std::vector<std::string>& cols) {
  std::ostringstream o;
  o.precision(10);
  o << "slot";
  for (const auto& c : cols) o << ',' << c;
  o << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    o << 'h' << i;
    for (std::size_t j = 0; j < m.cols(); ++j) o << ',' << m(i, j);
    o << '\n';
  }
  return o.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Permutation-invariant recurrent tracking: data, training, evaluation and reports"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, det_c, attn_c, count_c;

  auto* gen = app.add_subcommand("gen-data", "simulate scenes and write a JSON-lines dataset");
  add_common(gen, gen_c);
  std::optional<std::size_t> n_scenes;
  std::uint64_t first_index = 0;
  std::string gen_output;
  gen->add_option("--scenes", n_scenes, "number of scenes (sim.scenes)");
  gen->add_option("--first-index", first_index, "scene index of the first generated scene");
  gen->add_option("-o,--output", gen_output, "dataset path (default <out>/dataset.jsonl)");

  auto* tr = app.add_subcommand("train", "train a PI-RNN or baseline model");
  add_common(tr, train_c);
  std::string train_path, val_path, model_kind;
  tr->add_option("--train", train_path, "training dataset");
  tr->add_option("--val", val_path, "validation dataset");
  tr->add_option("--model", model_kind, "pirnn or baseline")->check(CLI::IsMember({"pirnn", "baseline"}));

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or the raw detections on a dataset");
  add_common(ev, eval_c);
  std::string eval_ckpt, eval_data;
  bool eval_raw = false;
  ev->add_option("--checkpoint", eval_ckpt, "model checkpoint");
  ev->add_flag("--raw", eval_raw, "score the raw detector output instead of a model");
  ev->add_option("--data", eval_data, "dataset")->required();

  auto* det = app.add_subcommand("det", "sweep the activity threshold and write DET curves");
  add_common(det, det_c);
  std::vector<std::string> det_ckpts;
  std::string det_data;
  bool det_raw = false;
  std::vector<double> det_thresholds;
  det->add_option("--checkpoint", det_ckpts, "model checkpoint, repeatable");
  det->add_flag("--raw", det_raw, "include the raw detector arm");
  det->add_option("--data", det_data, "dataset")->required();
  det->add_option("--thresholds", det_thresholds, "activity thresholds in (0,1)")->delimiter(',');

  auto* at = app.add_subcommand("attn", "export per-frame attention matrices of a PI-RNN checkpoint");
  add_common(at, attn_c);
  std::string attn_ckpt, attn_data, attn_frames;
  std::size_t attn_scene = 0;
  at->add_option("--checkpoint", attn_ckpt, "PI-RNN checkpoint")->required();
  at->add_option("--data", attn_data, "dataset")->required();
  at->add_option("--scene", attn_scene, "scene index");
  at->add_option("--frames", attn_frames, "frame range a:b (default all)");

  auto* pc = app.add_subcommand("param-count", "print the trainable-parameter ledger");
  add_common(pc, count_c);
  bool print_schema = false;
  pc->add_flag("--schema", print_schema, "print the parameter schema as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*gen) {
      Settings s = load_settings(gen_c);
      if (gen_c.seed) s.sim.seed = *gen_c.seed;
      if (n_scenes) s.scenes = *n_scenes;
      const auto dir = out_dir(gen_c);
      const fs::path path = gen_output.empty() ? dir / "dataset.jsonl" : fs::path(gen_output);
      const auto scenes = parallel::generate_dataset(s.sim, s.scenes, parallel::Execution::openmp, first_index);
      write_dataset(path.string(), scenes);
      out << "wrote " << scenes.size() << " scenes to " << path.string() << "\n";
      return kOk;
    }

    if (*tr) {
      Settings s = load_settings(train_c);
      TrainConfig cfg = s.train;
      cfg.metrics = s.metrics;
      if (train_c.seed) cfg.seed = *train_c.seed;
      if (!train_path.empty()) cfg.train_path = train_path;
      if (!val_path.empty()) cfg.val_path = val_path;
      if (model_kind == "baseline") cfg.kind = ModelKind::baseline;
      if (model_kind == "pirnn") cfg.kind = ModelKind::pirnn;
      if (cfg.train_path.empty()) throw ConfigError("train: --train (or train.train_path) is required");
      const auto dir = out_dir(train_c);
      if (fs::path(cfg.checkpoint_path).is_relative()) cfg.checkpoint_path = (dir / cfg.checkpoint_path).string();
      if (fs::path(cfg.log_path).is_relative()) cfg.log_path = (dir / cfg.log_path).string();
      const TrainResult r = train(cfg);
      out << "trained " << r.steps << " steps; best epoch " << r.best_epoch << ", val loss " << r.best_val_loss
          << "\ncheckpoint " << cfg.checkpoint_path << "\nlog " << cfg.log_path << "\n";
      return kOk;
    }

    if (*ev) {
      Settings s = load_settings(eval_c);
      if (eval_ckpt.empty() == !eval_raw) throw ConfigError("eval: give exactly one of --checkpoint or --raw");
      const auto scenes = read_dataset(eval_data);
      std::string name;
      const EvalResult r = eval_arm(eval_ckpt, scenes, s.metrics, name);
      const auto dir = out_dir(eval_c);
      write_file(dir / (name + "_report.csv"), report_csv(r.scenes, r.total));
      nlohmann::json j = report_json(r.total);
      j["arm"] = name;
      j["gate_deg"] = s.metrics.gate_deg;
      j["activity_threshold"] = s.metrics.activity_threshold;
      j["scenes"] = nlohmann::json::array();
      for (const auto& sc : r.scenes) j["scenes"].push_back(report_json(sc));
      write_file(dir / (name + "_report.json"), j.dump(2) + "\n");
      write_file(dir / (name + "_det.csv"), det_csv(r.det));
      out << name << ": ids_per_active_minute " << r.total.ids_per_active_minute() << ", mean_error_deg "
          << r.total.mean_error_deg << ", misses " << r.total.misses << ", false_positives "
          << r.total.false_positives << "\n";
      return kOk;
    }

    if (*det) {
      Settings s = load_settings(det_c);
      if (!det_thresholds.empty()) s.metrics.det_thresholds = det_thresholds;
      if (det_ckpts.empty() && !det_raw) throw ConfigError("det: give --checkpoint and/or --raw");
      const auto scenes = read_dataset(det_data);
      const auto dir = out_dir(det_c);
      std::vector<svg::Series> series;
      std::vector<std::string> sources = det_ckpts;
      if (det_raw) sources.insert(sources.begin(), "");
      for (const auto& ckpt : sources) {
        std::string name;
        const EvalResult r = eval_arm(ckpt, scenes, s.metrics, name);
        write_file(dir / (name + "_det.csv"), det_csv(r.det));
        svg::Series ser{name, {}, {}};
        for (const auto& p : r.det) {
          ser.x.push_back(p.fp_rate);
          ser.y.push_back(p.miss_rate);
        }
        series.push_back(std::move(ser));
        out << "wrote " << (dir / (name + "_det.csv")).string() << "\n";
      }
      write_file(dir / "det.svg", svg::line_plot(series, "false positives per frame", "miss rate", "DET curve"));
      return kOk;
    }

    if (*at) {
      const auto scenes = read_dataset(attn_data);
      if (attn_scene >= scenes.size()) throw ConfigError("attn: scene index out of range");
      LoadedModel lm = load_model(attn_ckpt);
      if (lm.model->kind() != "pirnn") throw ConfigError("attn: checkpoint is not a PI-RNN model");
      const Scene& sc = scenes[attn_scene];
      const auto [a, b] = parse_range(attn_frames, sc.T);
      if (a >= b || b > sc.T) throw ConfigError("attn: frame range outside the scene");
      std::vector<AttentionWeights> attention;
      track_sequence(*lm.model, lm.params, sc.detections, &attention);
      const auto dir = out_dir(attn_c);
      const auto cols = attention_labels(sc.M, lm.model->slots());
      std::vector<std::string> rows;
      for (std::size_t i = 0; i < lm.model->slots(); ++i) rows.push_back("h" + std::to_string(i));
      for (std::size_t t = a; t < b; ++t) {
        const auto& heads = attention[t];
        const std::string stem = "attn_scene" + std::to_string(attn_scene) + "_t" + std::to_string(t);
        for (std::size_t h = 0; h < heads.size(); ++h) {
          write_file(dir / (stem + "_head" + std::to_string(h) + ".csv"), matrix_csv(heads[h], cols));
        }
        const Tensor mean = mean_over_heads(heads);
        write_file(dir / (stem + "_mean.csv"), matrix_csv(mean, cols));
        write_file(dir / (stem + "_mean.svg"), svg::heatmap(mean, rows, cols, "frame " + std::to_string(t)));
      }
      out << "wrote attention for frames [" << a << ", " << b << ") to " << dir.string() << "\n";
      return kOk;
    }

    if (*pc) {
      Settings s = load_settings(count_c);
      const ModelConfig& mc = s.train.model;
      PirnnModel pirnn(mc);
      if (print_schema) {
        const std::size_t db = param_match(mc);
        nlohmann::json j = {{"pirnn", schema_to_json(pirnn.schema())},
                            {"baseline", schema_to_json(BaselineModel(mc.M, db).schema())}};
        out << j.dump(2) << "\n";
        return kOk;
      }
      const std::size_t db = param_match(mc);
      BaselineModel base(mc.M, db);
      const double ratio = static_cast<double>(base.parameter_count()) / static_cast<double>(pirnn.parameter_count());
      out << "PI-RNN (M=" << mc.M << ", d=" << mc.d << ", n_heads=" << mc.n_heads << ", d_g=" << mc.d_g
          << ", mlp_hidden=" << mc.mlp_hidden << ")\n";
      for (const auto& [name, n] : parameter_ledger(pirnn.schema())) out << "  " << name << " " << n << "\n";
      out << "  total " << pirnn.parameter_count() << "\n";
      out << "baseline (two GRUs, hidden=" << db << ")\n";
      for (const auto& [name, n] : parameter_ledger(base.schema())) out << "  " << name << " " << n << "\n";
      out << "  total " << base.parameter_count() << "\n";
      out << "baseline/pirnn ratio " << ratio << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace pirnn::cli
