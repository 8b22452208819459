// Command-line front end: synthesis, training, evaluation, gradient
// checking, and the four experiment sweeps. Every command that writes an
// output file also writes <out>.manifest.json recording the resolved
// configuration, the seed, and digests of the inputs; rerunning a command
// with identical flags and inputs reproduces the outputs byte for byte.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfgru/sfgru.hpp"
#include "sfgru/reference.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitSchema = 3;
constexpr int kExitNumeric = 4;

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sfgru::schema_error("cannot open input file " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const nlohmann::json& config, std::uint64_t seed,
                    const std::vector<std::string>& inputs) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  nlohmann::json digests = nlohmann::json::object();
  for (const std::string& p : inputs) digests[p] = fnv1a64_file(p);
  m["inputs"] = digests;
  m["outputs"] = {out_path};
  std::ofstream out(out_path + ".manifest.json");
  if (!out) throw sfgru::error("cannot write manifest for " + out_path);
  out << m.dump(2) << "\n";
}

struct ModelFlags {
  std::string model = "sf-gru";
  std::string features;      // comma-separated keys; empty = model default
  std::string fusion_order;  // alias for --features, sf-gru only
  std::size_t hidden = 256;

  sfgru::ModelSpec to_spec(std::size_t obs_len) const {
    sfgru::ModelSpec spec;
    spec.kind = sfgru::parse_model_kind(model);
    spec.hidden_dim = hidden;
    spec.obs_len = obs_len;
    std::string list = features;
    if (!fusion_order.empty()) {
      if (spec.kind != sfgru::ModelKind::StackedFusionGru) {
        throw sfgru::error("--fusion-order applies to sf-gru only");
      }
      list = fusion_order;
    }
    if (!list.empty()) {
      spec.fusion_order.clear();
      std::string item;
      for (char c : list + ",") {
        if (c == ',') {
          if (!item.empty()) spec.fusion_order.push_back(sfgru::parse_feature_key(item));
          item.clear();
        } else {
          item.push_back(c);
        }
      }
    } else if (spec.kind == sfgru::ModelKind::Static) {
      spec.fusion_order = {sfgru::FeatureKey::Cp, sfgru::FeatureKey::Cs};
    }
    sfgru::validate_spec(spec);
    return spec;
  }
};

struct TrainFlags {
  double lr = -1.0;  // <0 = use mode default
  std::size_t epochs = 60;
  std::size_t batch = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  bool no_balance = false;
  bool no_flip = false;
  std::string mode = "paper";

  sfgru::TrainConfig to_config() const {
    sfgru::TrainConfig cfg = mode == "synth" ? sfgru::TrainConfig::synth_defaults()
                                             : sfgru::TrainConfig::paper_defaults();
    if (lr >= 0.0) cfg.lr = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.l2 = l2;
    cfg.seed = seed;
    cfg.balance = !no_balance;
    cfg.flip_augment = !no_flip;
    cfg.validate();
    return cfg;
  }

  nlohmann::json to_json(const sfgru::TrainConfig& cfg) const {
    return {{"lr", cfg.lr},       {"epochs", cfg.epochs},   {"batch", cfg.batch_size},
            {"l2", cfg.l2},       {"balance", cfg.balance}, {"flip_augment", cfg.flip_augment},
            {"mode", mode}};
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--lr", f.lr, "learning rate (default from --mode)");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch", f.batch, "minibatch size");
  cmd->add_option("--l2", f.l2, "L2 regularization strength");
  cmd->add_option("--seed", f.seed, "master RNG seed");
  cmd->add_flag("--no-balance", f.no_balance, "disable per-epoch class balancing");
  cmd->add_flag("--no-flip", f.no_flip, "disable horizontal-flip augmentation");
  cmd->add_option("--mode", f.mode, "hyperparameter defaults: paper (lr 5e-6) or synth (lr 1e-3)")
      ->check(CLI::IsMember({"paper", "synth"}));
}

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--model", f.model, "architecture")
      ->check(CLI::IsMember({"static", "gru", "m-gru", "h-gru", "s-gru", "sf-gru"}));
  cmd->add_option("--features", f.features, "comma-separated feature keys (Cp,Cs,P,B,S,Cps,D)");
  cmd->add_option("--fusion-order", f.fusion_order, "sf-gru level order, bottom first");
  cmd->add_option("--hidden", f.hidden, "GRU hidden units");
}

// The six architectures of the comparison study: the static baseline sees
// the last-frame context pair, every temporal model the full feature set.
std::vector<sfgru::ModelSpec> comparison_specs(std::size_t hidden, std::size_t obs_len) {
  using sfgru::FeatureKey;
  using sfgru::ModelKind;
  std::vector<sfgru::ModelSpec> specs;
  for (ModelKind kind : {ModelKind::Static, ModelKind::SingleGru, ModelKind::MultiStreamGru,
                         ModelKind::HierarchicalGru, ModelKind::StackedGru,
                         ModelKind::StackedFusionGru}) {
    sfgru::ModelSpec spec;
    spec.kind = kind;
    spec.hidden_dim = hidden;
    spec.obs_len = obs_len;
    if (kind == ModelKind::Static) {
      spec.fusion_order = {FeatureKey::Cp, FeatureKey::Cs};
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

// A verification window with every feature entry of moderate magnitude and
// bounded away from zero. Physical-scale inputs (speed in km/h) would
// saturate gates at Glorot init and push gradients into the band where
// finite-difference cancellation noise (about ulp(loss)/2h) dominates the
// 1e-8 denominator floor of the relative-error measure.
sfgru::ObservationWindow gradcheck_window(sfgru::Rng& rng, std::size_t m) {
  auto entry = [&rng]() {
    const double mag = rng.uniform(0.1, 1.0);
    return rng.uniform01() < 0.5 ? mag : -mag;
  };
  const double x0 = rng.uniform(100, 1500);
  const double y0 = rng.uniform(100, 700);
  const double w = rng.uniform(30, 120);
  const double h = rng.uniform(80, 260);
  const double dx = (rng.uniform01() < 0.5 ? 1.0 : -1.0) * rng.uniform(0.3, 1.2);
  const double dy = (rng.uniform01() < 0.5 ? 1.0 : -1.0) * rng.uniform(0.3, 1.2);
  std::vector<sfgru::FrameFeatures> frames;
  for (std::size_t t = 0; t < m; ++t) {
    sfgru::FrameFeatures f;
    const double td = static_cast<double>(t);
    f.bbox = sfgru::BBox{x0 + dx * td, y0 + dy * td, x0 + w + dx * td, y0 + h + dy * td};
    f.speed_kmh = rng.uniform(0.5, 1.5);
    f.c_p.resize(sfgru::kContextDim);
    f.c_s.resize(sfgru::kContextDim);
    f.c_ps.resize(sfgru::kContextDim);
    for (std::size_t i = 0; i < sfgru::kContextDim; ++i) {
      f.c_p[i] = entry();
      f.c_s[i] = entry();
      f.c_ps[i] = 0.5 * (f.c_p[i] + f.c_s[i]);
    }
    f.pose_norm.resize(sfgru::kPoseDim);
    for (double& x : f.pose_norm) x = rng.uniform(0.1, 0.9);
    frames.push_back(std::move(f));
  }
  return sfgru::make_window(std::move(frames), 1920, 1080);
}

int run_gradcheck(const ModelFlags& model_flags, std::size_t m, std::uint64_t seed) {
  const sfgru::ModelSpec spec = model_flags.to_spec(m);

  sfgru::Rng wrng = sfgru::Rng(seed).fork(1);
  std::vector<sfgru::WindowSample> samples;
  for (int label : {0, 1}) {
    sfgru::WindowSample s;
    s.window = gradcheck_window(wrng, m);
    s.label = label;
    s.track_id = "gradcheck";
    samples.push_back(std::move(s));
  }

  sfgru::Rng rng(seed);
  sfgru::ModelParams params = sfgru::init_model(spec, rng);
  const sfgru::reference::GradcheckReport report =
      sfgru::reference::gradcheck(spec, params, samples);

  std::printf("model %s hidden %zu m %zu params %zu\n", model_flags.model.c_str(),
              spec.hidden_dim, m, report.n_params);
  std::printf("max relative error: %.3e (worst at %s)\n", report.max_rel_err,
              report.worst_param.c_str());
  const bool pass = report.max_rel_err < 1e-4;
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stacked multilevel-fusion GRU engine for pedestrian crossing anticipation"};
  app.require_subcommand(1);

  // --- synth ---------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic track file");
  sfgru::SynthConfig synth_cfg;
  std::string synth_out;
  synth_cmd->add_option("--n", synth_cfg.n_tracks, "number of tracks");
  synth_cmd->add_option("--ratio", synth_cfg.class_ratio, "non-crossing : crossing ratio");
  synth_cmd->add_option("--snr", synth_cfg.snr, "signal-to-noise knob (0 = label-independent)");
  synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed");
  synth_cmd->add_option("--track-len", synth_cfg.track_len_frames, "frames per track");
  synth_cmd->add_flag("--flip-context", synth_cfg.emit_flip_context,
                      "emit flipped context vectors");
  synth_cmd->add_option("--out", synth_out, "output JSONL path")->required();

  // --- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train one model, write a checkpoint");
  std::string train_tracks, train_out;
  double train_obs_s = 0.5, train_tte_s = 2.0;
  int train_jobs = 1;
  ModelFlags train_model;
  TrainFlags train_flags;
  train_cmd->add_option("--tracks", train_tracks, "track JSONL file")->required();
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  train_cmd->add_option("--obs-len-s", train_obs_s, "observation length in seconds");
  train_cmd->add_option("--tte-s", train_tte_s, "time to event in seconds");
  train_cmd->add_option("--jobs", train_jobs, "accepted for interface parity; training is serial");
  add_model_flags(train_cmd, train_model);
  add_train_flags(train_cmd, train_flags);

  // --- eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string eval_tracks, eval_ckpt, eval_out;
  double eval_tte_s = 2.0;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--tracks", eval_tracks, "track JSONL file")->required();
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--out", eval_out, "CSV report path")->required();
  eval_cmd->add_option("--tte-s", eval_tte_s, "time to event in seconds");
  eval_cmd->add_option("--seed", eval_seed, "split seed (must match training)");

  // --- gradcheck -----------------------------------------------------------
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare BPTT gradients to finite differences");
  ModelFlags grad_model;
  std::size_t grad_m = 3;
  std::uint64_t grad_seed = 1;
  grad_model.hidden = 4;
  add_model_flags(grad_cmd, grad_model);
  grad_cmd->add_option("--m", grad_m, "observation length in frames");
  grad_cmd->add_option("--seed", grad_seed, "instance seed");

  // --- sweeps --------------------------------------------------------------
  struct SweepFlags {
    std::string tracks, out;
    double obs_len_s = 0.5;
    int jobs = 1;
    ModelFlags model;
    TrainFlags train;
  };
  auto add_sweep = [&](const char* name, const char* desc, SweepFlags& f, bool with_model) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--tracks", f.tracks, "track JSONL file")->required();
    cmd->add_option("--out", f.out, "CSV report path")->required();
    cmd->add_option("--obs-len-s", f.obs_len_s, "observation length in seconds");
    cmd->add_option("--jobs", f.jobs, "parallel sweep conditions (1 = bitwise deterministic)");
    if (with_model) {
      add_model_flags(cmd, f.model);
    } else {
      cmd->add_option("--hidden", f.model.hidden, "GRU hidden units");
    }
    add_train_flags(cmd, f.train);
    return cmd;
  };
  SweepFlags tte_flags, obs_flags, ablate_flags, fusion_flags;
  auto* tte_cmd = add_sweep("sweep-tte", "all six architectures across the 19 TTE anchors",
                            tte_flags, false);
  auto* obs_cmd = add_sweep("sweep-obs", "observation-length x TTE grid (16 combinations)",
                            obs_flags, true);
  auto* ablate_cmd =
      add_sweep("ablate", "the seven feature-set configurations", ablate_flags, true);
  auto* fusion_cmd =
      add_sweep("fusion-order", "the six fusion-order permutations", fusion_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth_cmd) {
      const std::vector<sfgru::Track> tracks = sfgru::synth_generate(synth_cfg);
      sfgru::save_tracks(synth_out, tracks);
      nlohmann::json config = {{"n", synth_cfg.n_tracks},
                               {"ratio", synth_cfg.class_ratio},
                               {"snr", synth_cfg.snr},
                               {"track_len", synth_cfg.track_len_frames},
                               {"flip_context", synth_cfg.emit_flip_context}};
      write_manifest(synth_out, "synth", config, synth_cfg.seed, {});
      std::printf("wrote %zu tracks to %s\n", tracks.size(), synth_out.c_str());
      return 0;
    }

    if (*train_cmd) {
      const std::vector<sfgru::Track> tracks = sfgru::load_tracks(train_tracks);
      const double fps = sfgru::detail::uniform_fps(tracks);
      const std::size_t m = sfgru::seconds_to_frames(train_obs_s, fps);
      const std::size_t tte = sfgru::seconds_to_frames(train_tte_s, fps);
      const sfgru::ModelSpec spec = train_model.to_spec(m);
      const sfgru::TrainConfig cfg = train_flags.to_config();

      const sfgru::DatasetSplit split = sfgru::split_train_test(tracks, 0.6, cfg.seed);
      const auto train_ptrs = sfgru::detail::select_tracks(tracks, split.train);
      const std::vector<sfgru::WindowSample> samples =
          sfgru::detail::sample_all(train_ptrs, sfgru::SamplingSpec::make(m, tte));
      if (samples.empty()) throw sfgru::error("no training windows after sampling");

      sfgru::TrainResult res = sfgru::train(spec, samples, cfg, &std::cout);
      if (res.flip_context_missing) {
        std::cerr << "warning: flip augmentation used unflipped context vectors "
                     "(no c_p_flip/c_s_flip in the track file)\n";
      }
      sfgru::save_checkpoint(train_out, spec, res.params);
      nlohmann::json config = train_flags.to_json(cfg);
      config["model"] = train_model.model;
      config["features"] = sfgru::fusion_order_str(spec.fusion_order);
      config["hidden"] = spec.hidden_dim;
      config["obs_len_s"] = train_obs_s;
      config["tte_s"] = train_tte_s;
      write_manifest(train_out, "train", config, cfg.seed, {train_tracks});
      std::printf("trained on %zu windows, final epoch loss %.6f, checkpoint %s\n",
                  samples.size(), res.epoch_loss.back(), train_out.c_str());
      return 0;
    }

    if (*eval_cmd) {
      const std::vector<sfgru::Track> tracks = sfgru::load_tracks(eval_tracks);
      auto [spec, params] = sfgru::load_checkpoint(eval_ckpt);
      const double fps = sfgru::detail::uniform_fps(tracks);
      const std::size_t tte = sfgru::seconds_to_frames(eval_tte_s, fps);

      const sfgru::DatasetSplit split = sfgru::split_train_test(tracks, 0.6, eval_seed);
      const auto test_ptrs = sfgru::detail::select_tracks(tracks, split.test);
      const std::vector<sfgru::WindowSample> samples =
          sfgru::detail::sample_all(test_ptrs, sfgru::SamplingSpec::make(spec.obs_len, tte));
      if (samples.empty()) throw sfgru::error("no evaluation windows after sampling");

      sfgru::SweepResult result;
      sfgru::SweepRow row;
      row.model = sfgru::to_string(spec.kind);
      row.features = sfgru::fusion_order_str(spec.fusion_order);
      row.fusion_order = spec.kind == sfgru::ModelKind::StackedFusionGru ? row.features : "-";
      row.tte_s = eval_tte_s;
      row.obs_len_s = static_cast<double>(spec.obs_len) / fps;
      row.n_test = samples.size();
      row.seed = eval_seed;
      row.metrics = sfgru::evaluate(spec, params, samples);
      result.rows.push_back(std::move(row));
      sfgru::write_csv(eval_out, result);
      write_manifest(eval_out, "eval", {{"tte_s", eval_tte_s}}, eval_seed,
                     {eval_tracks, eval_ckpt});
      std::printf("%s", sfgru::to_csv(result).c_str());
      return 0;
    }

    if (*grad_cmd) {
      return run_gradcheck(grad_model, grad_m, grad_seed);
    }

    auto run_sweep_cmd = [&](const SweepFlags& f, const std::string& name,
                             const std::function<sfgru::SweepResult(
                                 const std::vector<sfgru::Track>&, const sfgru::SweepConfig&,
                                 double fps)>& body) {
      const std::vector<sfgru::Track> tracks = sfgru::load_tracks(f.tracks);
      const double fps = sfgru::detail::uniform_fps(tracks);
      sfgru::SweepConfig cfg;
      cfg.train = f.train.to_config();
      cfg.split_seed = cfg.train.seed;
      cfg.jobs = f.jobs;
      const sfgru::SweepResult result = body(tracks, cfg, fps);
      sfgru::write_csv(f.out, result);
      nlohmann::json config = f.train.to_json(cfg.train);
      config["hidden"] = f.model.hidden;
      config["obs_len_s"] = f.obs_len_s;
      config["jobs"] = f.jobs;
      write_manifest(f.out, name, config, cfg.train.seed, {f.tracks});
      std::printf("wrote %zu rows to %s\n", result.rows.size(), f.out.c_str());
      return 0;
    };

    if (*tte_cmd) {
      return run_sweep_cmd(tte_flags, "sweep-tte",
                           [&](const auto& tracks, const auto& cfg, double fps) {
                             const std::size_t m =
                                 sfgru::seconds_to_frames(tte_flags.obs_len_s, fps);
                             return sfgru::sweep_tte(comparison_specs(tte_flags.model.hidden, m),
                                                     tracks, m, cfg);
                           });
    }
    if (*obs_cmd) {
      return run_sweep_cmd(obs_flags, "sweep-obs",
                           [&](const auto& tracks, const auto& cfg, double fps) {
                             const std::size_t m =
                                 sfgru::seconds_to_frames(obs_flags.obs_len_s, fps);
                             return sfgru::sweep_obs_length(obs_flags.model.to_spec(m), tracks,
                                                            cfg);
                           });
    }
    if (*ablate_cmd) {
      return run_sweep_cmd(ablate_flags, "ablate",
                           [&](const auto& tracks, const auto& cfg, double fps) {
                             const std::size_t m =
                                 sfgru::seconds_to_frames(ablate_flags.obs_len_s, fps);
                             return sfgru::ablate_features(ablate_flags.model.to_spec(m), tracks,
                                                           cfg, sfgru::seconds_to_frames(2.0, fps));
                           });
    }
    if (*fusion_cmd) {
      return run_sweep_cmd(
          fusion_flags, "fusion-order", [&](const auto& tracks, const auto& cfg, double fps) {
            const std::size_t m = sfgru::seconds_to_frames(fusion_flags.obs_len_s, fps);
            return sfgru::sweep_fusion_order(tracks, sfgru::default_fusion_orders(), cfg,
                                             fusion_flags.model.hidden, m,
                                             sfgru::seconds_to_frames(2.0, fps));
          });
    }
  } catch (const sfgru::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const sfgru::schema_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const sfgru::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
