#pragma once

// Config-driven pipeline runs behind the command-line subcommands.
//
// A RunConfig is a JSON document; missing keys take defaults and the resolved
// form (sorted keys) is written next to every output as run_config.json, so
// re-running that file reproduces the outputs. Randomness flows from `seed`:
// training uses it directly, the seeded split uses derive_seed(seed, 1000),
// synthetic data uses derive_seed(seed, 2000).

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "daqcnn/cnn.hpp"
#include "daqcnn/dataset_io.hpp"
#include "daqcnn/kernel.hpp"
#include "daqcnn/metrics.hpp"
#include "daqcnn/quanvolve.hpp"
#include "daqcnn/simulator.hpp"
#include "daqcnn/synthetic.hpp"
#include "json.hpp"

namespace daqcnn::run {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::uint64_t split_seed_tag = 1000;
inline constexpr std::uint64_t synth_seed_tag = 2000;

struct RunConfig {
  // Dataset
  std::string dataset;
  std::string format = "idx";  // idx | png
  std::string dataset_split = "all";
  // Quanvolution
  KernelSpec kernel;
  std::optional<std::size_t> stride;  // defaults to kernel.n
  bool raw = false;
  // Feature files
  std::string features;
  std::string val_features;
  std::string test_features;
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  // Training
  nn::TrainConfig train;
  nn::GridSpec grid;
  std::string checkpoint;
  std::string eval_split = "all";  // all | train | val | test
  // Synthetic data
  SyntheticOptions synth;
  // Output and execution
  std::string out;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t workers = 0;

  std::size_t resolved_stride() const { return stride.value_or(kernel.n); }
};

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const RunConfig& c) {
  json acts = json::array();
  for (auto a : c.grid.activations) acts.push_back(nn::to_string(a));
  return json{
      {"dataset", {{"path", c.dataset}, {"format", c.format}, {"split", c.dataset_split}}},
      {"kernel", kernel_to_json(c.kernel)},
      {"stride", c.resolved_stride()},
      {"raw", c.raw},
      {"features", {{"train", c.features}, {"val", c.val_features}, {"test", c.test_features}}},
      {"split", {{"train", c.train_fraction}, {"val", c.val_fraction}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"dropout", c.train.dropout},
        {"activation", nn::to_string(c.train.activation)},
        {"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"patience", c.train.patience},
        {"filters", c.train.filters}}},
      {"grid",
       {{"learning_rates", c.grid.learning_rates},
        {"dropouts", c.grid.dropouts},
        {"activations", acts},
        {"repeats", c.grid.repeats}}},
      {"checkpoint", c.checkpoint},
      {"eval_split", c.eval_split},
      {"synth", {{"count", c.synth.count}, {"size", c.synth.size}, {"noise", c.synth.noise}}},
      {"out", c.out},
      {"out_dir", c.out_dir},
      {"seed", c.seed},
      {"workers", c.workers},
  };
}

/// Missing keys keep their defaults; malformed values are ConfigError.
inline RunConfig from_json(const json& doc) {
  RunConfig c;
  try {
    if (!doc.is_object()) throw error(errc::config_error, "run config must be a JSON object");
    const json none = json::object();
    const json& ds = doc.contains("dataset") ? doc["dataset"] : none;
    c.dataset = ds.value("path", c.dataset);
    c.format = ds.value("format", c.format);
    c.dataset_split = ds.value("split", c.dataset_split);
    if (doc.contains("kernel")) c.kernel = kernel_from_json(doc["kernel"]);
    if (doc.contains("stride") && !doc["stride"].is_null()) c.stride = doc["stride"].get<std::size_t>();
    c.raw = doc.value("raw", c.raw);
    const json& ft = doc.contains("features") ? doc["features"] : none;
    c.features = ft.value("train", c.features);
    c.val_features = ft.value("val", c.val_features);
    c.test_features = ft.value("test", c.test_features);
    const json& sp = doc.contains("split") ? doc["split"] : none;
    c.train_fraction = sp.value("train", c.train_fraction);
    c.val_fraction = sp.value("val", c.val_fraction);
    const json& tr = doc.contains("train") ? doc["train"] : none;
    c.train.learning_rate = tr.value("learning_rate", c.train.learning_rate);
    c.train.dropout = tr.value("dropout", c.train.dropout);
    if (tr.contains("activation")) c.train.activation = nn::activation_from_string(tr["activation"].get<std::string>());
    c.train.batch_size = tr.value("batch_size", c.train.batch_size);
    c.train.epochs = tr.value("epochs", c.train.epochs);
    c.train.patience = tr.value("patience", c.train.patience);
    c.train.filters = tr.value("filters", c.train.filters);
    const json& gr = doc.contains("grid") ? doc["grid"] : none;
    c.grid.learning_rates = gr.value("learning_rates", c.grid.learning_rates);
    c.grid.dropouts = gr.value("dropouts", c.grid.dropouts);
    if (gr.contains("activations")) {
      c.grid.activations.clear();
      for (const auto& a : gr["activations"]) c.grid.activations.push_back(nn::activation_from_string(a.get<std::string>()));
    }
    c.grid.repeats = gr.value("repeats", c.grid.repeats);
    c.checkpoint = doc.value("checkpoint", c.checkpoint);
    c.eval_split = doc.value("eval_split", c.eval_split);
    const json& sy = doc.contains("synth") ? doc["synth"] : none;
    c.synth.count = sy.value("count", c.synth.count);
    c.synth.size = sy.value("size", c.synth.size);
    c.synth.noise = sy.value("noise", c.synth.noise);
    c.out = doc.value("out", c.out);
    c.out_dir = doc.value("out_dir", c.out_dir);
    c.seed = doc.value("seed", c.seed);
    c.workers = doc.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw error(errc::config_error, std::string("run config: ") + e.what());
  }
  c.train.seed = c.seed;
  c.synth.seed = derive_seed(c.seed, synth_seed_tag);
  c.train.validate();
  c.kernel.validate();
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw error(errc::io_error, "config not found: " + path.string());
  try {
    return from_json(json::parse(io::read_text(path)));
  } catch (const json::parse_error& e) {
    throw error(errc::config_error, path.string() + ": " + e.what());
  }
}

inline std::string canonical(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline void write_config(const fs::path& path, const RunConfig& c) { io::write_text(path, canonical(c)); }

// ---------------------------------------------------------------------------
// Text output helpers

/// Shortest representation that round-trips.
inline std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string shape_text(std::size_t h, std::size_t w, std::size_t c) {
  return std::to_string(h) + "×" + std::to_string(w) + "×" + std::to_string(c);
}

// ---------------------------------------------------------------------------
// Datasets

/// `split` "all" reads images.idx / labels.idx (or labels.csv); any other
/// split name reads <split>-images.idx / <split>-labels.idx (or <split>.csv).
inline Dataset load_dataset(const std::string& dir, const std::string& format, const std::string& split) {
  if (dir.empty()) throw error(errc::config_error, "no dataset path given");
  const fs::path d(dir);
  const std::string prefix = split == "all" ? "" : split + "-";
  Dataset ds;
  if (format == "idx") {
    const auto images = d / (prefix + "images.idx"), labels = d / (prefix + "labels.idx");
    if (!fs::exists(images)) throw error(errc::missing_file, "missing " + images.string());
    if (!fs::exists(labels)) throw error(errc::missing_file, "missing " + labels.string());
    ds = read_idx(images, labels);
  } else if (format == "png") {
    ds = read_png_csv(d, d / (split == "all" ? std::string("labels.csv") : split + ".csv"));
  } else {
    throw error(errc::config_error, "unknown dataset format: " + format);
  }
  ds.split = split == "train" ? Split::train : split == "val" ? Split::val : split == "test" ? Split::test : Split::all;
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& dir, const std::string& format, const std::string& split) {
  const fs::path d(dir);
  fs::create_directories(d);
  const std::string prefix = split == "all" ? "" : split + "-";
  if (format == "idx") {
    write_idx(ds, d / (prefix + "images.idx"), d / (prefix + "labels.idx"));
  } else if (format == "png") {
    std::ostringstream csv;
    csv << "filename,label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string name = prefix + "img" + std::to_string(i) + ".png";
      write_png_gray(ds.images[i], d / name);
      csv << name << ',' << int(ds.labels[i]) << '\n';
    }
    io::write_text(d / (split == "all" ? std::string("labels.csv") : split + ".csv"), csv.str());
  } else {
    throw error(errc::config_error, "unknown dataset format: " + format);
  }
}

// ---------------------------------------------------------------------------
// Subcommands

inline fs::path sidecar_config_path(const fs::path& out) { return out.string() + ".run_config.json"; }

inline QuanvolveResult cmd_quanvolve(const RunConfig& c, std::ostream& log) {
  if (c.out.empty()) throw error(errc::config_error, "quanvolve needs --out");
  const Dataset ds = load_dataset(c.dataset, c.format, c.dataset_split);
  if (auto parent = fs::path(c.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  const auto r = c.raw ? export_raw_dataset(ds, c.out) : quanvolve_dataset(ds, c.kernel, c.resolved_stride(), c.out, c.workers);
  write_config(sidecar_config_path(c.out), c);
  log << (r.cache_hit ? "cache hit" : "computed") << ": " << r.num_images << " images, "
      << shape_text(r.h_out, r.w_out, r.channels) << " per image\n"
      << "sha256 " << r.file_digest << "\n";
  return r;
}

struct Splits {
  nn::Samples train, val, test;
};

/// Separate feature files when val is given, otherwise a stratified seeded
/// split of the training file.
inline Splits load_splits(const RunConfig& c) {
  if (c.features.empty()) throw error(errc::config_error, "no feature file given");
  const auto f = read_feature_file(c.features);
  if (!c.val_features.empty()) {
    Splits s{nn::samples_from_features(f), nn::samples_from_features(read_feature_file(c.val_features)), {}};
    if (!c.test_features.empty()) s.test = nn::samples_from_features(read_feature_file(c.test_features));
    else s.test.shape = s.train.shape;
    return s;
  }
  const auto idx = nn::split_indices(f.labels, derive_seed(c.seed, split_seed_tag), c.train_fraction, c.val_fraction);
  return {nn::samples_from_features(f, idx.train), nn::samples_from_features(f, idx.val),
          nn::samples_from_features(f, idx.test)};
}

inline json split_metrics(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels) {
  json m{{"n", labels.size()}, {"acc", accuracy(probs, labels)}};
  const auto counts = detail::count_classes(labels);
  m["auc"] = counts.pos && counts.neg ? json(auc(probs, labels)) : json(nullptr);
  return m;
}

inline void write_roc(const fs::path& path, const std::vector<double>& probs, const std::vector<std::uint8_t>& labels) {
  std::ostringstream csv;
  csv << "fpr,tpr\n";
  for (const auto& p : roc_points(probs, labels)) csv << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
  io::write_text(path, csv.str());
}

inline bool has_both_classes(const std::vector<std::uint8_t>& labels) {
  const auto counts = detail::count_classes(labels);
  return counts.pos && counts.neg;
}

/// Writes model.dqkm, history.csv, metrics.json, roc_val.csv, roc_test.csv
/// (when the test split has both classes) and run_config.json to out_dir.
inline json cmd_train(const RunConfig& c, std::ostream& log) {
  const Splits s = load_splits(c);
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  const auto r = nn::train(s.train, s.val, c.train);
  nn::write_checkpoint(dir / "model.dqkm", r.params);

  std::ostringstream hist;
  hist << "epoch,train_loss,val_loss,val_auc,val_acc\n";
  for (const auto& e : r.history)
    hist << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_loss) << ',' << fmt(e.val_auc) << ','
         << fmt(e.val_acc) << '\n';
  io::write_text(dir / "history.csv", hist.str());

  json metrics{{"best_epoch", r.best_epoch},
               {"epochs_run", r.history.size()},
               {"input_shape", {s.train.shape.h, s.train.shape.w, s.train.shape.c}},
               {"parameters", nn::total_params(nn::param_count(r.params.arch, r.params.input))}};
  const auto train_probs = nn::predict(r.params, s.train);
  metrics["train"] = split_metrics(train_probs, s.train.labels);
  const auto val_probs = nn::predict(r.params, s.val);
  metrics["val"] = split_metrics(val_probs, s.val.labels);
  write_roc(dir / "roc_val.csv", val_probs, s.val.labels);
  if (s.test.size() > 0) {
    const auto test_probs = nn::predict(r.params, s.test);
    metrics["test"] = split_metrics(test_probs, s.test.labels);
    if (has_both_classes(s.test.labels)) write_roc(dir / "roc_test.csv", test_probs, s.test.labels);
  }
  io::write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_config(dir / "run_config.json", c);

  log << "trained " << r.history.size() << " epochs, best epoch " << r.best_epoch << "\n"
      << "val auc " << metrics["val"]["auc"].dump() << " acc " << metrics["val"]["acc"].dump() << "\n";
  if (metrics.contains("test"))
    log << "test auc " << metrics["test"]["auc"].dump() << " acc " << metrics["test"]["acc"].dump() << "\n";
  return metrics;
}

/// Scores one split (eval_split) of the configured features with a checkpoint;
/// writes evaluation.json and roc_<split>.csv to out_dir.
inline json cmd_evaluate(const RunConfig& c, std::ostream& log) {
  if (c.checkpoint.empty()) throw error(errc::config_error, "evaluate needs --checkpoint");
  const auto model = nn::read_checkpoint(c.checkpoint);
  nn::Samples samples;
  if (c.eval_split == "all") {
    if (c.features.empty()) throw error(errc::config_error, "no feature file given");
    samples = nn::samples_from_features(read_feature_file(c.features));
  } else {
    Splits s = load_splits(c);
    if (c.eval_split == "train") samples = std::move(s.train);
    else if (c.eval_split == "val") samples = std::move(s.val);
    else if (c.eval_split == "test") samples = std::move(s.test);
    else throw error(errc::config_error, "unknown split: " + c.eval_split);
  }
  if (samples.size() == 0) throw error(errc::empty_split, c.eval_split + " split is empty");
  const auto probs = nn::predict(model, samples);
  json metrics{{"split", c.eval_split}, {"metrics", split_metrics(probs, samples.labels)}};
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  if (has_both_classes(samples.labels)) write_roc(dir / ("roc_" + c.eval_split + ".csv"), probs, samples.labels);
  io::write_text(dir / "evaluation.json", metrics.dump(2) + "\n");
  write_config(dir / "run_config.json", c);
  log << c.eval_split << ": n " << samples.size() << " auc " << metrics["metrics"]["auc"].dump() << " acc "
      << metrics["metrics"]["acc"].dump() << "\n";
  return metrics;
}

/// Writes grid.csv (one row per run), grid_summary.csv (quartiles per cell),
/// best.json and run_config.json to out_dir.
inline nn::GridResult cmd_gridsearch(const RunConfig& c, std::ostream& log) {
  const Splits s = load_splits(c);
  if (s.test.size() == 0) throw error(errc::empty_split, "grid search needs a test split");
  const auto g = nn::grid_search(s.train, s.val, s.test, c.train, c.grid, c.workers);
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);

  std::ostringstream rows;
  rows << "row,cell,learning_rate,dropout,activation,repeat,seed,best_epoch,epochs_run,val_auc,val_acc,test_auc,test_acc\n";
  for (const auto& r : g.rows)
    rows << r.row << ',' << r.cell << ',' << fmt(r.learning_rate) << ',' << fmt(r.dropout) << ','
         << nn::to_string(r.activation) << ',' << r.repeat << ',' << r.seed << ',' << r.best_epoch << ',' << r.epochs_run
         << ',' << fmt(r.val_auc) << ',' << fmt(r.val_acc) << ',' << fmt(r.test_auc) << ',' << fmt(r.test_acc) << '\n';
  io::write_text(dir / "grid.csv", rows.str());

  std::ostringstream sum;
  sum << "cell,learning_rate,dropout,activation,metric,min,q1,median,q3,max\n";
  for (const auto& cs : g.summaries)
    for (const auto& [name, q] : {std::pair{"val_auc", cs.val_auc}, std::pair{"test_auc", cs.test_auc},
                                  std::pair{"test_acc", cs.test_acc}})
      sum << cs.cell << ',' << fmt(cs.learning_rate) << ',' << fmt(cs.dropout) << ',' << nn::to_string(cs.activation)
          << ',' << name << ',' << fmt(q.min) << ',' << fmt(q.q1) << ',' << fmt(q.median) << ',' << fmt(q.q3) << ','
          << fmt(q.max) << '\n';
  io::write_text(dir / "grid_summary.csv", sum.str());

  const auto& b = g.rows[g.best];
  const json best{{"row", b.row},           {"learning_rate", b.learning_rate},
                  {"dropout", b.dropout},   {"activation", nn::to_string(b.activation)},
                  {"repeat", b.repeat},     {"seed", b.seed},
                  {"val_auc", b.val_auc},   {"val_acc", b.val_acc},
                  {"test_auc", b.test_auc}, {"test_acc", b.test_acc}};
  io::write_text(dir / "best.json", best.dump(2) + "\n");
  write_config(dir / "run_config.json", c);
  log << g.rows.size() << " runs; best row " << b.row << " (lr " << b.learning_rate << ", dropout " << b.dropout << ", "
      << nn::to_string(b.activation) << ", repeat " << b.repeat << "): val auc " << b.val_auc << ", test auc "
      << b.test_auc << ", test acc " << b.test_acc << "\n";
  return g;
}

inline json sensitivity_report(const KernelSpec& single, const std::vector<double>& phis, std::ostream& log) {
  const auto sm = sensitivity_matrix(single, phis);
  json rows = json::array();
  double max_off = 0.0;
  for (std::size_t i = 0; i < sm.size; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < sm.size; ++j) {
      row.push_back(sm(i, j));
      if (i != j) max_off = std::max(max_off, std::abs(sm(i, j)));
      char buf[32];
      std::snprintf(buf, sizeof buf, " % .3e", sm(i, j));
      log << buf;
    }
    rows.push_back(row);
    log << "\n";
  }
  log << "  max |off-diagonal| " << fmt(max_off) << "\n";
  return {{"sensitivity", rows}, {"max_off_diagonal", max_off}};
}

/// Prints kernel outputs, per-graph sensitivity matrices and the Trotter
/// fidelity against a 64-substep dense oracle (skipped above 10 qubits).
inline json cmd_inspect_kernel(const RunConfig& c, const std::vector<double>& phis, std::ostream& log) {
  const KernelSpec& spec = c.kernel;
  if (phis.size() != spec.num_qubits())
    throw error(errc::size_error, "expected " + std::to_string(spec.num_qubits()) + " angles");
  json report{{"kernel", kernel_to_json(spec)}, {"phis", phis}};
  const auto out = multi_daqk_eval(phis, spec);
  report["outputs"] = out;
  log << "outputs:";
  for (double v : out) log << ' ' << fmt(v);
  log << "\n";

  report["graphs"] = json::array();
  for (std::size_t m = 0; m < spec.graphs.size(); ++m) {
    const KernelSpec single = spec.single(m);
    json g{{"name", spec.graphs[m].name()}};
    log << "graph " << m << " (" << spec.graphs[m].name() << ") sensitivity:";
    if (std::all_of(phis.begin(), phis.end(), [](double p) { return p > 1e-5 && p < std::numbers::pi - 1e-5; })) {
      log << "\n";
      g.update(sensitivity_report(single, phis, log));
    } else {
      log << " skipped, angles must lie in (h, pi - h)\n";
      g["sensitivity"] = nullptr;
    }

    if (spec.num_qubits() <= sim::max_dense_qubits) {
      const sim::Interaction inter{single.graphs[0], coupling_matrix(single.graphs[0], single.coupling)};
      const auto oracle = sim::exact_evolve_oracle(sim::init_encoded_state(phis), spec.schedule, spec.tau, 64, inter);
      const auto trot = sim::trotter_evolve(sim::init_encoded_state(phis), spec.schedule, spec.tau, spec.steps, inter);
      const double f = sim::fidelity(trot, oracle);
      g["trotter_fidelity"] = f;
      log << "  trotter fidelity vs oracle " << fmt(f) << "\n";
    }
    report["graphs"].push_back(g);
  }
  return report;
}

/// Writes a blob-vs-ring dataset in the configured format to `dataset`.
inline Dataset cmd_synth(const RunConfig& c, std::ostream& log) {
  const Dataset ds = make_blob_ring(c.synth);
  save_dataset(ds, c.dataset, c.format, c.dataset_split);
  log << "wrote " << ds.size() << " images of " << c.synth.size << "×" << c.synth.size << " to " << c.dataset
      << "\n";
  return ds;
}

}  // namespace daqcnn::run
