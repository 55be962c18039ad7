// daqcnn: quanvolve, train, evaluate, gridsearch, inspect-kernel, synth.
// Every subcommand accepts --config run.json; flags given on the command line
// override the file.

#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "daqcnn/run.hpp"

namespace {

using daqcnn::run::json;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw daqcnn::error(daqcnn::errc::config_error, "not a number: " + item);
    out.push_back(v);
  }
  return out;
}

// Flag values collected before the config file is known.
struct Flags {
  std::string config;
  std::optional<std::string> dataset, format, split, out, out_dir, features, val_features, test_features, checkpoint,
      eval_split, graphs, activation, lrs, dropouts, activations, phis, schedule;
  std::optional<std::size_t> kernel_size, stride, batch_size, epochs, patience, filters, repeats, workers, count, size;
  std::optional<int> steps;
  std::optional<double> tau, theta0, c6, lr, dropout, train_fraction, val_fraction, noise;
  std::optional<std::uint64_t> seed;
  bool raw = false;
};

template <typename T>
void set_if(json& doc, const json::json_pointer& ptr, const std::optional<T>& v) {
  if (v) doc[ptr] = *v;
}

json overlay(const Flags& f) {
  json doc = f.config.empty() ? json::object() : json::parse(daqcnn::io::read_text(f.config));
  if (!doc.is_object()) throw daqcnn::error(daqcnn::errc::config_error, "config must be a JSON object");
  if (!doc.contains("kernel")) doc["kernel"] = json::object();
  using P = json::json_pointer;
  set_if(doc, P("/dataset/path"), f.dataset);
  set_if(doc, P("/dataset/format"), f.format);
  set_if(doc, P("/dataset/split"), f.split);
  set_if(doc, P("/kernel/n"), f.kernel_size);
  if (f.graphs) doc["kernel"]["graphs"] = split_list(*f.graphs);
  set_if(doc, P("/kernel/tau"), f.tau);
  set_if(doc, P("/kernel/steps"), f.steps);
  set_if(doc, P("/kernel/theta0"), f.theta0);
  if (f.c6) doc["kernel"]["coupling"] = {{"model", "geometric"}, {"c6", *f.c6}};
  set_if(doc, P("/stride"), f.stride);
  if (f.raw) doc["raw"] = true;
  set_if(doc, P("/features/train"), f.features);
  set_if(doc, P("/features/val"), f.val_features);
  set_if(doc, P("/features/test"), f.test_features);
  set_if(doc, P("/split/train"), f.train_fraction);
  set_if(doc, P("/split/val"), f.val_fraction);
  set_if(doc, P("/train/learning_rate"), f.lr);
  set_if(doc, P("/train/dropout"), f.dropout);
  set_if(doc, P("/train/activation"), f.activation);
  set_if(doc, P("/train/batch_size"), f.batch_size);
  set_if(doc, P("/train/epochs"), f.epochs);
  set_if(doc, P("/train/patience"), f.patience);
  set_if(doc, P("/train/filters"), f.filters);
  if (f.lrs) doc["grid"]["learning_rates"] = parse_doubles(*f.lrs);
  if (f.dropouts) doc["grid"]["dropouts"] = parse_doubles(*f.dropouts);
  if (f.activations) doc["grid"]["activations"] = split_list(*f.activations);
  set_if(doc, P("/grid/repeats"), f.repeats);
  set_if(doc, P("/checkpoint"), f.checkpoint);
  set_if(doc, P("/eval_split"), f.eval_split);
  set_if(doc, P("/synth/count"), f.count);
  set_if(doc, P("/synth/size"), f.size);
  set_if(doc, P("/synth/noise"), f.noise);
  set_if(doc, P("/out"), f.out);
  set_if(doc, P("/out_dir"), f.out_dir);
  set_if(doc, P("/seed"), f.seed);
  set_if(doc, P("/workers"), f.workers);
  return doc;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config; flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "top-level seed");
  cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
}

void add_dataset(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dataset", f.dataset, "dataset directory");
  cmd->add_option("--format", f.format, "idx or png");
  cmd->add_option("--split", f.split, "all, or a split prefix such as train / val / test");
}

void add_kernel(CLI::App* cmd, Flags& f) {
  cmd->add_option("--kernel-size", f.kernel_size, "patch side n");
  cmd->add_option("--graphs", f.graphs, "comma list of kings, grid4, diag, ring, empty");
  cmd->add_option("--tau", f.tau, "evolution time");
  cmd->add_option("--steps", f.steps, "Trotter steps");
  cmd->add_option("--theta0", f.theta0, "final global Ry angle");
  cmd->add_option("--c6", f.c6, "geometric coupling constant, J = C6 / r^6");
}

void add_features(CLI::App* cmd, Flags& f) {
  cmd->add_option("--features", f.features, "feature file (training split, or the whole set)");
  cmd->add_option("--val-features", f.val_features, "validation feature file");
  cmd->add_option("--test-features", f.test_features, "test feature file");
  cmd->add_option("--train-fraction", f.train_fraction, "seeded split: training fraction");
  cmd->add_option("--val-fraction", f.val_fraction, "seeded split: validation fraction");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
}

void add_training(CLI::App* cmd, Flags& f) {
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--dropout", f.dropout, "dropout rate");
  cmd->add_option("--activation", f.activation, "relu or gelu");
  cmd->add_option("--batch-size", f.batch_size, "minibatch size");
  cmd->add_option("--epochs", f.epochs, "maximum epochs");
  cmd->add_option("--patience", f.patience, "early-stopping patience on validation AUC (0 = off)");
  cmd->add_option("--filters", f.filters, "convolution filters");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-analog quantum convolutional pipeline"};
  app.require_subcommand(1);
  Flags f;

  auto* quanvolve = app.add_subcommand("quanvolve", "quanvolve a dataset into a DQKF feature file");
  add_common(quanvolve, f);
  add_dataset(quanvolve, f);
  add_kernel(quanvolve, f);
  quanvolve->add_option("--stride", f.stride, "patch stride (default n)");
  quanvolve->add_option("--out", f.out, "output feature file");
  quanvolve->add_flag("--raw", f.raw, "store pixel/255 instead of kernel outputs");

  auto* train = app.add_subcommand("train", "train the classical head on feature files");
  add_common(train, f);
  add_features(train, f);
  add_training(train, f);

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on feature files");
  add_common(evaluate, f);
  add_features(evaluate, f);
  evaluate->add_option("--checkpoint", f.checkpoint, "DQKM checkpoint");
  evaluate->add_option("--eval-split", f.eval_split, "all, train, val or test");

  auto* grid = app.add_subcommand("gridsearch", "grid search over learning rate, dropout and activation");
  add_common(grid, f);
  add_features(grid, f);
  add_training(grid, f);
  grid->add_option("--lrs", f.lrs, "comma list of learning rates");
  grid->add_option("--dropouts", f.dropouts, "comma list of dropout rates");
  grid->add_option("--activations", f.activations, "comma list of activations");
  grid->add_option("--repeats", f.repeats, "initializations per cell");

  auto* inspect = app.add_subcommand("inspect-kernel", "print kernel outputs, sensitivities and oracle fidelity");
  add_common(inspect, f);
  add_kernel(inspect, f);
  inspect->add_option("--phis", f.phis, "comma list of n*n angles")->required();

  auto* synth = app.add_subcommand("synth", "write a blob-vs-ring synthetic dataset");
  add_common(synth, f);
  add_dataset(synth, f);
  synth->add_option("--count", f.count, "number of images");
  synth->add_option("--size", f.size, "image side");
  synth->add_option("--noise", f.noise, "pixel noise std (full scale = 1)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = daqcnn::run::from_json(overlay(f));
    if (quanvolve->parsed()) {
      daqcnn::run::cmd_quanvolve(cfg, std::cout);
    } else if (train->parsed()) {
      daqcnn::run::cmd_train(cfg, std::cout);
    } else if (evaluate->parsed()) {
      daqcnn::run::cmd_evaluate(cfg, std::cout);
    } else if (grid->parsed()) {
      daqcnn::run::cmd_gridsearch(cfg, std::cout);
    } else if (inspect->parsed()) {
      daqcnn::run::cmd_inspect_kernel(cfg, parse_doubles(*f.phis), std::cout);
    } else if (synth->parsed()) {
      daqcnn::run::cmd_synth(cfg, std::cout);
    }
  } catch (const daqcnn::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
