#include "fusebio/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "fusebio/fusion.hpp"
#include "fusebio/verification.hpp"

namespace fusebio {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << content;
  if (!os) throw IoError("write failed: " + path);
}

std::string ensure_out_dir(const RunConfig& cfg) {
  const std::string out = cfg.get("out");
  if (out.empty()) throw ConfigError("'out' must not be empty");
  fs::create_directories(out);
  write_text((fs::path(out) / "resolved_config.txt").string(), cfg.render());
  return out;
}

Manifest require_manifest(const RunConfig& cfg) {
  const std::string path = cfg.get("manifest");
  if (path.empty()) throw ConfigError("this command needs --manifest PATH");
  return load_manifest(path);
}

void usage(std::FILE* to) {
  std::fprintf(to,
               "usage: fusebio <command> [--config PATH] [--key value ...]\n"
               "\n"
               "commands:\n"
               "  synth        generate a synthetic multimodal dataset under --out\n"
               "  extract      write per-utterance feature files (--feature mfcc|gtg|gtg-image)\n"
               "  train-voice  train the x-vector network on a manifest\n"
               "  train-fusion train a fusion-layer model (--mode feature_gtg|feature_xvec|score|sensor)\n"
               "  eval         run a cross-validated experiment (--task id|verify --mode ...)\n"
               "  report       re-render the markdown table from a report CSV (--csv PATH)\n"
               "\n"
               "common keys: --seed N --out DIR --jobs N --manifest PATH --k N\n"
               "any config key can be set as --key value; see README for the full list\n");
}

}  // namespace

int cmd_synth(const RunConfig& cfg) {
  const std::string out = ensure_out_dir(cfg);
  const SynthConfig sc = cfg.synth();
  const SynthDataset ds = synth_generate(sc);

  fs::create_directories(fs::path(out) / "wav");
  fs::create_directories(fs::path(out) / "face");

  std::vector<ManifestRow> rows;
  rows.reserve(ds.utterances.size());
  for (std::size_t i = 0; i < ds.utterances.size(); ++i) {
    const SynthUtterance& u = ds.utterances[i];
    const int utt_index = static_cast<int>(i) % sc.n_utt_per_class;
    ManifestRow row;
    row.utt_id = u.utt_id;
    row.speaker_id = u.speaker_id;
    row.wav_path = "wav/" + u.utt_id + ".wav";
    row.face_emb_path = "face/" + u.utt_id + ".fbem";
    write_wav((fs::path(out) / row.wav_path).string(), synth_wav(sc, u.speaker, utt_index));
    save_face_embedding((fs::path(out) / row.face_emb_path).string(), u.face);
    write_pgm((fs::path(out) / "face" / (u.utt_id + ".pgm")).string(), u.face_image);
    rows.push_back(std::move(row));
  }
  save_manifest((fs::path(out) / "manifest.csv").string(), rows);
  std::printf("synth: %zu utterances, %d speakers -> %s\n", ds.utterances.size(), ds.n_classes,
              out.c_str());
  return kExitOk;
}

int cmd_extract(const RunConfig& cfg) {
  const std::string out = ensure_out_dir(cfg);
  const Manifest manifest = require_manifest(cfg);
  const FrontendConfig fe = cfg.frontend();
  const std::string feature = cfg.get("feature");
  if (feature != "mfcc" && feature != "gtg" && feature != "gtg-image") {
    throw ConfigError("unknown feature '" + feature + "'");
  }
  const int jobs = std::max(1, cfg.get_int("jobs"));

  std::mutex error_mutex;
  std::vector<std::string> errors;
  std::atomic<std::size_t> next{0};

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= manifest.rows.size()) return;
      const ManifestRow& row = manifest.rows[i];
      try {
        const AudioClip clip = apply_vad(load_wav(manifest.resolve(row.wav_path)), fe);
        if (feature == "mfcc") {
          const FrameMatrix m = apply_cmvn(compute_mfcc(clip, fe));
          save_feature_matrix((fs::path(out) / (row.utt_id + ".fbfm")).string(), m.values,
                              kMagicFrameMatrix);
        } else if (feature == "gtg") {
          const Gammatonegram g = compute_gammatonegram(clip, fe);
          save_feature_matrix((fs::path(out) / (row.utt_id + ".fbgt")).string(), g.values,
                              kMagicGammatonegram);
        } else {
          const Gammatonegram g = compute_gammatonegram(clip, fe);
          write_pgm((fs::path(out) / (row.utt_id + ".pgm")).string(),
                    render_gammatonegram_image(g, 128, 64));
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        errors.push_back(row.utt_id + ": " + e.what());
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    for (const std::string& e : errors) std::fprintf(stderr, "extract error: %s\n", e.c_str());
    return kExitData;
  }
  std::printf("extract: %zu %s files -> %s\n", manifest.rows.size(), feature.c_str(),
              out.c_str());
  return kExitOk;
}

int cmd_train_voice(const RunConfig& cfg) {
  const std::string out = ensure_out_dir(cfg);
  const Manifest manifest = require_manifest(cfg);
  FeatureNeeds needs;
  needs.mfcc = true;
  const EvalDataset data = load_eval_dataset(manifest, cfg.frontend(), needs);

  VoiceNetSpec spec = cfg.voicenet();
  spec.n_classes = data.n_classes;
  Network net = build_voicenet(spec, cfg.get_u64("seed"));

  // correctness gate on a truncated sample before any training
  const Eigen::Index gate_frames =
      std::min<Eigen::Index>(data.utts.front().mfcc.n_frames(), net.receptive_field() + 8);
  const Eigen::MatrixXd gate_input = data.utts.front().mfcc.values.topRows(gate_frames);
  const double gate_err = gradient_check(net, Signal(gate_input), data.utts.front().speaker, 1e-5);
  if (!(gate_err < 1e-4)) {
    std::fprintf(stderr, "gradient check failed: max relative error %.3g >= 1e-4\n", gate_err);
    return kExitNumericGate;
  }

  std::vector<TrainSample> samples;
  samples.reserve(data.utts.size());
  for (const EvalUtterance& u : data.utts) samples.push_back({Signal(u.mfcc.values), u.speaker});
  const TrainResult result = train(net, samples, cfg.voice_train());

  save_network((fs::path(out) / "voicenet.fbnn").string(), net);
  std::ostringstream log;
  log << "epoch,loss,lr\n";
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.8g\n", e + 1, result.history[e].mean_loss,
                  result.history[e].lr);
    log << buf;
  }
  write_text((fs::path(out) / "train_log.csv").string(), log.str());
  std::printf("train-voice: gradient check %.3g, %zu epochs, final loss %.4f -> %s\n", gate_err,
              result.history.size(), result.history.back().mean_loss, out.c_str());
  return kExitOk;
}

int cmd_train_fusion(const RunConfig& cfg) {
  const std::string out = ensure_out_dir(cfg);
  const Manifest manifest = require_manifest(cfg);
  const std::string mode_name = cfg.get("mode");
  const IdMode mode = id_mode_from_string(mode_name);
  if (mode == IdMode::kFace || mode == IdMode::kVoiceXvec || mode == IdMode::kVoiceGtg) {
    throw ConfigError("'" + mode_name + "' is a single-modality mode; nothing to fuse");
  }
  const EvalOptions opts = cfg.eval_options();
  const EvalDataset data = load_eval_dataset(manifest, opts.frontend, needs_for(mode));

  std::vector<std::size_t> all_idx(data.utts.size());
  std::iota(all_idx.begin(), all_idx.end(), std::size_t{0});
  TrainConfig fusion_cfg = opts.fusion_train;
  fusion_cfg.seed = mix_seed(opts.seed, 2);

  std::vector<Eigen::VectorXd> raw;
  if (mode == IdMode::kSensor) {
    raw = compute_sensor_features(data, opts);
  } else {
    const std::vector<FusionVector> fused = compute_fusion_vectors(data, mode, all_idx, opts);
    raw.reserve(fused.size());
    for (const FusionVector& v : fused) raw.push_back(v.values);
  }
  const SoftmaxClassifier model =
      train_standardized_classifier(raw, all_idx, data.speakers(), data.n_classes, fusion_cfg);
  const std::string model_path =
      (fs::path(out) / ("fusion_" + mode_name + ".fbsm")).string();
  save_fusion_model(model_path, model);
  std::printf("train-fusion: %s on %zu utterances -> %s\n", mode_name.c_str(), data.utts.size(),
              model_path.c_str());
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
  const std::string out = ensure_out_dir(cfg);
  const Manifest manifest = require_manifest(cfg);
  const std::string task = cfg.get("task");
  const EvalOptions opts = cfg.eval_options();

  std::string md, csv, tag;
  if (task == "id") {
    const IdMode mode = id_mode_from_string(cfg.get("mode"));
    const EvalDataset data = load_eval_dataset(manifest, opts.frontend, needs_for(mode));
    const IdExperimentReport report = run_identification_experiment(data, mode, opts);
    md = render_id_report_markdown(report);
    csv = render_id_report_csv(report);
    tag = "id_" + id_mode_name(mode);
  } else if (task == "verify") {
    const VerifyMode mode = verify_mode_from_string(cfg.get("mode"));
    const EvalDataset data = load_eval_dataset(manifest, opts.frontend, needs_for(mode));
    const VerifyExperimentReport report = run_verification_experiment(data, mode, opts);
    md = render_verify_report_markdown(report);
    csv = render_verify_report_csv(report);
    tag = "verify_" + verify_mode_name(mode);
  } else {
    throw ConfigError("unknown task '" + task + "' (expected id or verify)");
  }

  write_text((fs::path(out) / ("report_" + tag + ".md")).string(), md);
  write_text((fs::path(out) / ("report_" + tag + ".csv")).string(), csv);
  std::printf("eval: wrote report_%s.{md,csv} -> %s\n", tag.c_str(), out.c_str());
  return kExitOk;
}

int cmd_report(const RunConfig& cfg) {
  const std::string out = ensure_out_dir(cfg);
  const std::string csv_path = cfg.get("csv");
  if (csv_path.empty()) throw ConfigError("report needs --csv PATH");
  const std::string task = cfg.get("task");

  std::ifstream is(csv_path);
  if (!is) throw IoError("cannot open: " + csv_path);
  std::string line;
  if (!std::getline(is, line) || line != "metric,fold,value") {
    throw CorruptFile("unexpected report CSV header: " + csv_path);
  }
  std::map<std::string, std::map<std::string, double>> table;  // metric -> fold -> value
  int k = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string metric, fold, value;
    if (!std::getline(ss, metric, ',') || !std::getline(ss, fold, ',') ||
        !std::getline(ss, value)) {
      throw CorruptFile("malformed report CSV line: " + line);
    }
    table[metric][fold] = std::strtod(value.c_str(), nullptr);
    if (fold != "avg") k = std::max(k, std::atoi(fold.c_str()));
  }
  if (table.empty() || k == 0) throw CorruptFile("report CSV has no data rows: " + csv_path);

  std::string md;
  if (task == "id") {
    IdExperimentReport report;
    report.mode = id_mode_from_string(cfg.get("mode"));
    report.k = k;
    report.folds.resize(k);
    const auto fill = [&](const char* metric, double MetricsReport::*field) {
      const auto it = table.find(metric);
      if (it == table.end()) throw CorruptFile(std::string("missing metric: ") + metric);
      for (int f = 1; f <= k; ++f) {
        report.folds[f - 1].*field = it->second.at(std::to_string(f));
      }
      report.average.*field = it->second.at("avg");
    };
    fill("precision", &MetricsReport::precision);
    fill("sensitivity", &MetricsReport::sensitivity);
    fill("specificity", &MetricsReport::specificity);
    fill("f_measure", &MetricsReport::f_measure);
    fill("accuracy", &MetricsReport::accuracy);
    md = render_id_report_markdown(report);
  } else if (task == "verify") {
    VerifyExperimentReport report;
    report.mode = verify_mode_from_string(cfg.get("mode"));
    report.k = k;
    const auto it = table.find("eer");
    if (it == table.end()) throw CorruptFile("missing metric: eer");
    for (int f = 1; f <= k; ++f) {
      report.fold_eer_percent.push_back(it->second.at(std::to_string(f)));
    }
    report.average_eer_percent = it->second.at("avg");
    md = render_verify_report_markdown(report);
  } else {
    throw ConfigError("unknown task '" + task + "' (expected id or verify)");
  }

  const std::string md_path = (fs::path(out) / "report_rendered.md").string();
  write_text(md_path, md);
  std::printf("report: %s -> %s\n", csv_path.c_str(), md_path.c_str());
  return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  if (argc < 2) {
    usage(stderr);
    return kExitUsage;
  }
  const std::string command = argv[1];
  if (command == "--help" || command == "-h" || command == "help") {
    usage(stdout);
    return kExitOk;
  }

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  for (int i = 2; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0) {
      std::fprintf(stderr, "expected --key value, got '%s'\n", arg.c_str());
      return kExitUsage;
    }
    if (i + 1 >= argc) {
      std::fprintf(stderr, "missing value for '%s'\n", arg.c_str());
      return kExitUsage;
    }
    const std::string key = arg.substr(2);
    const std::string value = argv[++i];
    if (key == "config") {
      config_path = value;
    } else {
      overrides.emplace_back(key, value);
    }
  }

  try {
    const RunConfig cfg = RunConfig::resolve(config_path, overrides);
    if (command == "synth") return cmd_synth(cfg);
    if (command == "extract") return cmd_extract(cfg);
    if (command == "train-voice") return cmd_train_voice(cfg);
    if (command == "train-fusion") return cmd_train_fusion(cfg);
    if (command == "eval") return cmd_eval(cfg);
    if (command == "report") return cmd_report(cfg);
    std::fprintf(stderr, "unknown command '%s'\n", command.c_str());
    usage(stderr);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}

}  // namespace fusebio
