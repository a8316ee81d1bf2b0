// Command-line front end: synth | train | eval | detect | ablate | render.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sodyolo/checkpoint.hpp"
#include "sodyolo/data.hpp"
#include "sodyolo/errors.hpp"
#include "sodyolo/evaluation.hpp"
#include "sodyolo/postprocess.hpp"
#include "sodyolo/render.hpp"
#include "sodyolo/report.hpp"
#include "sodyolo/train.hpp"

namespace fs = std::filesystem;
using namespace sodyolo;

namespace {

KeyValueConfig suppression_defaults() {
  const SuppressionConfig d;
  KeyValueConfig kv;
  kv.set("suppress.mode", to_string(d.mode));
  kv.set("suppress.nt", format_double(d.nt));
  kv.set("suppress.score_floor", format_double(d.score_floor));
  kv.set("suppress.class_agnostic", d.class_agnostic ? "true" : "false");
  return kv;
}

SuppressionConfig suppression_from(const KeyValueConfig& kv) {
  SuppressionConfig s;
  s.mode = parse_suppression_mode(kv.get_string("suppress.mode", to_string(s.mode)));
  s.nt = kv.get_double("suppress.nt", s.nt);
  s.score_floor = kv.get_double("suppress.score_floor", s.score_floor);
  s.class_agnostic = kv.get_bool("suppress.class_agnostic", s.class_agnostic);
  s.validate();
  return s;
}

KeyValueConfig synth_defaults() {
  const SynthConfig d;
  KeyValueConfig kv;
  kv.set("synth.image_size", std::to_string(d.image_size));
  kv.set("synth.num_images", std::to_string(d.num_images));
  kv.set("synth.objects_min", std::to_string(d.objects_min));
  kv.set("synth.objects_max", std::to_string(d.objects_max));
  kv.set("synth.num_classes", std::to_string(d.num_classes));
  kv.set("synth.tiny_fraction_target", format_double(d.tiny_fraction_target));
  kv.set("synth.tiny_min_area", std::to_string(d.tiny_min_area));
  kv.set("synth.large_min_area", std::to_string(d.large_min_area));
  kv.set("synth.large_max_area", std::to_string(d.large_max_area));
  kv.set("synth.clutter_level", format_double(d.clutter_level));
  kv.set("synth.max_overlap", format_double(d.max_overlap));
  kv.set("synth.image_format", d.image_format);
  kv.set("synth.seed", std::to_string(d.seed));
  return kv;
}

SynthConfig synth_from(const KeyValueConfig& kv) {
  SynthConfig s;
  auto sz = [&](const char* key, std::size_t v) {
    const long long r = kv.get_int(key, static_cast<long long>(v));
    if (r < 0) throw std::invalid_argument(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(r);
  };
  s.image_size = sz("synth.image_size", s.image_size);
  s.num_images = sz("synth.num_images", s.num_images);
  s.objects_min = sz("synth.objects_min", s.objects_min);
  s.objects_max = sz("synth.objects_max", s.objects_max);
  s.num_classes = sz("synth.num_classes", s.num_classes);
  s.tiny_fraction_target = kv.get_double("synth.tiny_fraction_target", s.tiny_fraction_target);
  s.tiny_min_area = sz("synth.tiny_min_area", s.tiny_min_area);
  s.large_min_area = sz("synth.large_min_area", s.large_min_area);
  s.large_max_area = sz("synth.large_max_area", s.large_max_area);
  s.clutter_level = kv.get_double("synth.clutter_level", s.clutter_level);
  s.max_overlap = kv.get_double("synth.max_overlap", s.max_overlap);
  s.image_format = kv.get_string("synth.image_format", s.image_format);
  s.seed = resolve_seed(static_cast<std::uint64_t>(kv.get_int("synth.seed", 0)));
  s.validate();
  return s;
}

KeyValueConfig eval_defaults() {
  KeyValueConfig kv;
  kv.set("eval.operating_score", format_double(EvalOptions{}.operating_score));
  return kv;
}

// Every key in `defaults` becomes a same-named --flag; an optional config file
// is read first and flags override it.
class Settings {
 public:
  Settings(CLI::App* app, std::vector<KeyValueConfig> groups) {
    app->add_option("--config", config_path_, "key=value config file");
    for (const auto& g : groups) {
      for (const auto& [key, value] : g.entries()) {
        auto& slot = values_[key];
        options_.emplace_back(key, app->add_option("--" + key, slot, "default: " + value));
      }
    }
  }

  void alias(CLI::App* app, const std::string& flag, std::vector<std::string> keys,
             const std::string& help) {
    auto& slot = alias_values_[flag];
    aliases_.push_back({app->add_option(flag, slot, help), std::move(keys), flag});
  }

  KeyValueConfig resolve() const {
    KeyValueConfig kv;
    if (!config_path_.empty()) kv = KeyValueConfig::load(config_path_);
    for (const auto& a : aliases_) {
      if (a.option->count() == 0) continue;
      for (const auto& k : a.keys) kv.set(k, alias_values_.at(a.flag));
    }
    for (const auto& [key, opt] : options_) {
      if (opt->count() > 0) kv.set(key, values_.at(key));
    }
    return kv;
  }

 private:
  struct Alias {
    CLI::Option* option;
    std::vector<std::string> keys;
    std::string flag;
  };
  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> alias_values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
  std::vector<Alias> aliases_;
};

KeyValueConfig model_defaults() {
  KeyValueConfig kv;
  ModelConfig{}.store(kv);
  kv.set("model.preset", "toy");
  return kv;
}

KeyValueConfig train_defaults() {
  KeyValueConfig kv;
  TrainConfig{}.store(kv);
  return kv;
}

std::vector<std::string> class_names() {
  return {visdrone_class_names().begin(), visdrone_class_names().end()};
}

void emit(const std::string& text, const std::string& out_path) {
  std::cout << text;
  if (!out_path.empty()) write_file(out_path, text);
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int run_synth(const KeyValueConfig& kv, const std::string& out) {
  const SynthConfig cfg = synth_from(kv);
  const DatasetIndex index = synth_generate(cfg, out);
  const AreaStats stats = area_stats(index);
  std::cout << "images=" << index.entries.size() << "\n"
            << "objects=" << stats.total << "\n"
            << "tiny_fraction=" << format_double(stats.tiny_fraction) << "\n"
            << "root=" << out << "\n";
  return 0;
}

int run_train(const KeyValueConfig& kv, const std::string& data, const std::string& out) {
  ModelConfig mc;
  mc.apply(kv);
  TrainConfig tc;
  tc.apply(kv);
  tc.seed = resolve_seed(tc.seed);
  const auto samples = load_samples(load_dataset(data), mc.input_size);
  Model model = Model::create(mc, tc.seed);
  train(model, samples, tc, [](const EpochLog& l) {
    std::printf("epoch=%zu lr=%.6g loss=%.6g objectness=%.6g classification=%.6g box=%.6g\n",
                l.epoch + 1, l.lr, l.mean.total, l.mean.objectness, l.mean.classification,
                l.mean.box);
    std::fflush(stdout);
  });
  if (!fs::path(out).parent_path().empty()) fs::create_directories(fs::path(out).parent_path());
  save_checkpoint(model, out);
  std::cout << "checkpoint=" << out << "\nfingerprint=" << hex64(model_fingerprint(model)) << "\n";
  return 0;
}

std::vector<DetectionRecord> detections_in_original_pixels(const std::vector<Sample>& samples,
                                                           const std::vector<std::vector<Detection>>& dets) {
  std::vector<DetectionRecord> records;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (auto d : dets[i]) {
      d.box = samples[i].transform.invert(d.box);
      records.push_back({samples[i].id, d});
    }
  }
  return records;
}

Model load_with_overrides(const std::string& path, const KeyValueConfig& kv) {
  Model model = load_checkpoint(path);
  model.config.conf_threshold = kv.get_double("model.conf_threshold", model.config.conf_threshold);
  return model;
}

int run_detect(const KeyValueConfig& kv, const std::string& ckpt, const std::string& data,
               const std::string& out) {
  const Model model = load_with_overrides(ckpt, kv);
  const SuppressionConfig sup = suppression_from(kv);
  const auto samples = load_samples(load_dataset(data), model.config.input_size);
  const auto dets = detect(model, samples, sup);
  const std::string text = format_detections(detections_in_original_pixels(samples, dets));
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file(out, text);
    std::cout << "detections=" << std::count(text.begin(), text.end(), '\n') << "\nout=" << out
              << "\n";
  }
  return 0;
}

int run_eval(const KeyValueConfig& kv, const std::string& ckpt, const std::string& dump,
             const std::string& data, bool json, const std::string& out) {
  EvalOptions opts;
  opts.operating_score = kv.get_double("eval.operating_score", opts.operating_score);
  const SuppressionConfig sup = suppression_from(kv);
  EvalReport report;
  if (!dump.empty()) {
    const DatasetIndex index = load_dataset(data);
    std::map<std::string, ImageRecord> by_id;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
      const std::string id = fs::path(index.entries[i].image).stem().string();
      by_id[id] = {id, {}, parse_visdrone(read_file(index.annotation_path(i))).objects};
      order.push_back(id);
    }
    for (const auto& r : parse_detections(read_file(dump))) {
      auto it = by_id.find(r.image_id);
      if (it == by_id.end()) throw std::invalid_argument("detection for unknown image " + r.image_id);
      it->second.dets.push_back(r.det);
    }
    std::vector<ImageRecord> records;
    for (const auto& id : order) records.push_back(by_id[id]);
    opts.suppression = "as-dumped";
    report = evaluate_records(records, class_names(), opts);
  } else {
    if (ckpt.empty()) throw std::invalid_argument("eval needs --checkpoint or --detections");
    const Model model = load_with_overrides(ckpt, kv);
    const auto samples = load_samples(load_dataset(data), model.config.input_size);
    report = evaluate(model, samples, class_names(), sup, opts);
  }
  emit(json ? report.to_json() : report.to_text(), out);
  return 0;
}

int run_ablate(const std::string& in, bool json, const std::vector<std::string>& claims) {
  const auto rows = parse_ablation_rows(read_file(in));
  std::cout << (json ? ablation_report_json(rows) : ablation_report(rows));
  for (const auto& c : claims) {
    std::vector<double> v;
    std::stringstream ss(c);
    std::string part;
    while (std::getline(ss, part, ',')) v.push_back(std::stod(part));
    if (v.size() != 3) throw std::invalid_argument("--claim expects new,base,percent");
    std::cout << "claim " << check_claim(v[0], v[1], v[2]).message << "\n";
  }
  return 0;
}

int run_render(const std::string& image_path, const std::string& dump, std::string image_id,
               const std::string& annotations, const std::string& out, bool no_labels) {
  const Image img = load_image(image_path);
  if (image_id.empty()) image_id = fs::path(image_path).stem().string();
  std::vector<Detection> dets;
  if (!dump.empty()) {
    for (const auto& r : parse_detections(read_file(dump)))
      if (r.image_id == image_id) dets.push_back(r.det);
  }
  std::vector<GroundTruth> gts;
  if (!annotations.empty()) gts = parse_visdrone(read_file(annotations)).objects;
  RenderOptions opts;
  opts.score_labels = !no_labels;
  save_image(render_detections(img, dets, gts, opts), out);
  std::cout << "detections=" << dets.size() << "\nout=" << out << "\n";
  return 0;
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-object detector toolkit"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  Settings synth_s(synth, {synth_defaults()});
  synth_s.alias(synth, "--seed", {"synth.seed"}, "generator seed");
  synth_s.alias(synth, "--images", {"synth.num_images"}, "number of images");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* trn = app.add_subcommand("train", "train a model");
  Settings train_s(trn, {model_defaults(), train_defaults()});
  train_s.alias(trn, "--seed", {"train.seed"}, "initialisation and shuffling seed");
  train_s.alias(trn, "--epochs", {"train.epochs"}, "number of epochs");
  std::string train_data, train_out;
  trn->add_option("--data", train_data, "dataset root")->required();
  trn->add_option("--out", train_out, "checkpoint path")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or a detection dump");
  Settings eval_s(ev, {suppression_defaults(), eval_defaults()});
  eval_s.alias(ev, "--suppression", {"suppress.mode"}, "hard | soft-linear");
  eval_s.alias(ev, "--nt", {"suppress.nt"}, "overlap threshold");
  eval_s.alias(ev, "--conf-threshold", {"model.conf_threshold"}, "decode score threshold");
  std::string eval_ckpt, eval_dump, eval_data, eval_out;
  bool eval_json = false;
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint path");
  ev->add_option("--detections", eval_dump, "detection dump to score instead of running a model");
  ev->add_option("--data", eval_data, "dataset root")->required();
  ev->add_option("--out", eval_out, "also write the report here");
  ev->add_flag("--json", eval_json, "machine-readable report");

  auto* det = app.add_subcommand("detect", "write detections for a dataset");
  Settings det_s(det, {suppression_defaults()});
  det_s.alias(det, "--suppression", {"suppress.mode"}, "hard | soft-linear");
  det_s.alias(det, "--nt", {"suppress.nt"}, "overlap threshold");
  det_s.alias(det, "--conf-threshold", {"model.conf_threshold"}, "decode score threshold");
  std::string det_ckpt, det_data, det_out;
  det->add_option("--checkpoint", det_ckpt, "checkpoint path")->required();
  det->add_option("--data", det_data, "dataset root")->required();
  det->add_option("--out", det_out, "detection dump path (stdout if omitted)");

  auto* abl = app.add_subcommand("ablate", "format an ablation table from stored metrics");
  std::string abl_in;
  bool abl_json = false;
  std::vector<std::string> abl_claims;
  abl->add_option("--in", abl_in, "rows: label,map5095,map50[,gflops]")->required();
  abl->add_flag("--json", abl_json, "machine-readable output");
  abl->add_option("--claim", abl_claims, "new,base,percent to check against the arithmetic");

  auto* ren = app.add_subcommand("render", "draw detections onto an image");
  std::string ren_image, ren_dump, ren_id, ren_ann, ren_out;
  bool ren_no_labels = false;
  ren->add_option("--image", ren_image, "input image (.ppm or .png)")->required();
  ren->add_option("--detections", ren_dump, "detection dump");
  ren->add_option("--image-id", ren_id, "image id in the dump (default: image stem)");
  ren->add_option("--annotations", ren_ann, "ground-truth annotation file");
  ren->add_option("--out", ren_out, "output image (.ppm or .png)")->required();
  ren->add_flag("--no-labels", ren_no_labels, "omit score labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_s.resolve(), synth_out);
    if (trn->parsed()) return run_train(train_s.resolve(), train_data, train_out);
    if (ev->parsed()) {
      return run_eval(eval_s.resolve(), eval_ckpt, eval_dump, eval_data, eval_json, eval_out);
    }
    if (det->parsed()) return run_detect(det_s.resolve(), det_ckpt, det_data, det_out);
    if (abl->parsed()) return run_ablate(abl_in, abl_json, abl_claims);
    if (ren->parsed()) {
      return run_render(ren_image, ren_dump, ren_id, ren_ann, ren_out, ren_no_labels);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}
