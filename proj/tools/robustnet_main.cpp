// Command-line front end: train / attack / certify / report / rank.
// Every run is reproducible from (config file, --seed, --split-seed); flags
// always override config-file values.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "robustnet/attacks.hpp"
#include "robustnet/data.hpp"
#include "robustnet/network.hpp"
#include "robustnet/report.hpp"
#include "robustnet/robust_bound.hpp"
#include "robustnet/trainer.hpp"

namespace {

using namespace robustnet;

struct DataOpts {
  std::string dataset;
  std::string data_format = "delimited";  // delimited | idx
  std::string idx_labels;                 // label file for idx datasets
  std::string label_column = "0";
  std::string delimiter = ",";
  bool header = false;
  std::string preprocess_kind = "none";
  std::uint64_t split_seed = 0;
  std::string eval_split = "test";  // train | val | test | all
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--dataset", d.dataset, "dataset path (delimited file, or IDX image file)")
      ->required();
  cmd->add_option("--data-format", d.data_format, "dataset layout: delimited or idx")
      ->check(CLI::IsMember({"delimited", "idx"}));
  cmd->add_option("--idx-labels", d.idx_labels, "IDX label file (idx format only)");
  cmd->add_option("--label-column", d.label_column,
                  "label column name (with --header) or 0-based index");
  cmd->add_option("--delimiter", d.delimiter, "field delimiter, single character");
  cmd->add_flag("--header", d.header, "first row holds column names");
  cmd->add_option("--preprocess", d.preprocess_kind, "none, scale01 or standardize")
      ->check(CLI::IsMember({"none", "scale01", "standardize"}));
  cmd->add_option("--split-seed", d.split_seed, "seed of the 60/20/20 split shuffle");
  cmd->add_option("--eval-split", d.eval_split, "split evaluated by attack/certify/report")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
}

Dataset load_data(const DataOpts& d) {
  Dataset ds;
  if (d.data_format == "idx") {
    if (d.idx_labels.empty())
      throw CLI::ValidationError("--idx-labels", "required when --data-format=idx");
    ds = load_idx(d.dataset, d.idx_labels);
  } else {
    if (d.delimiter.size() != 1)
      throw CLI::ValidationError("--delimiter", "must be a single character");
    ds = load_delimited(d.dataset, d.label_column, d.delimiter[0], d.header);
  }
  split(ds, d.split_seed);
  preprocess(ds, parse_preprocess(d.preprocess_kind));
  return ds;
}

std::vector<std::size_t> eval_indices(const Dataset& ds, const std::string& which) {
  if (which == "train") return ds.train;
  if (which == "val") return ds.val;
  if (which == "test") return ds.test;
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

/// Attack labels double as report column names: "fgsm", or kind_l{1,2,inf}.
AttackConfig parse_attack_label(const std::string& label) {
  AttackConfig cfg;
  if (label == "fgsm") {
    cfg.kind = AttackKind::fgsm;
    cfg.p = Norm::linf;
    return cfg;
  }
  auto sep = label.rfind("_l");
  if (sep == std::string::npos)
    throw CLI::ValidationError("--attacks", "bad attack label '" + label +
                                                "' (want fgsm or <kind>_l<p>)");
  cfg.kind = parse_attack(label.substr(0, sep));
  cfg.p = parse_norm(label.substr(sep + 2));
  return cfg;
}

std::string attack_label(const AttackConfig& cfg) {
  if (cfg.kind == AttackKind::fgsm) return "fgsm";
  return attack_name(cfg.kind) + "_l" + norm_name(cfg.p);
}

std::string model_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

void write_text(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot open output file " + out);
  os << text;
}

void write_table(const ReportTable& table, const std::string& out, const std::string& format) {
  write_text(out, format == "json" ? table.to_json() : table.to_csv());
}

double scaled(double rho, bool scale, std::size_t m) {
  return scale ? scale_rho_l1(rho, m) : rho;
}

struct TrainOpts {
  DataOpts data;
  std::vector<std::size_t> hidden{32};
  std::string objective = "nominal";
  std::string p = "inf";
  double rho = 0.0;
  double lr = 0.1;
  std::size_t batch = 32;
  std::size_t iters = 1000;
  std::vector<double> lr_grid;
  std::vector<double> rho_grid;
  bool scale_rho = false;
  std::string val_attack = "";  // attack label; default derived from objective
  double val_rho = -1.0;        // default: training rho
  std::size_t attack_steps = 40;
  double attack_step_size = 0.0;
  std::size_t attack_restarts = 2;
};

int run_train(const TrainOpts& o, std::uint64_t seed, const std::string& out,
              const std::string& format) {
  Dataset ds = load_data(o.data);
  std::size_t m = ds.feature_dim();

  RobustConfig obj{parse_objective(o.objective), parse_norm(o.p), scaled(o.rho, o.scale_rho, m)};
  obj.validate();
  TrainConfig cfg;
  cfg.objective = obj;
  cfg.learning_rate = o.lr;
  cfg.batch_size = o.batch;
  cfg.iterations = o.iters;
  cfg.seed = seed;
  cfg.lr_grid = o.lr_grid;
  for (double r : o.rho_grid) cfg.rho_grid.push_back(scaled(r, o.scale_rho, m));

  std::vector<std::size_t> widths;
  widths.push_back(m);
  for (std::size_t h : o.hidden) widths.push_back(h);
  widths.push_back(ds.class_count());
  Rng init_rng(seed);
  NetworkParams init = NetworkParams::random(widths, init_rng);

  AttackConfig val_attack =
      o.val_attack.empty()
          ? [&] {
              AttackConfig a;
              a.kind = AttackKind::pgd;
              a.p = obj.objective == Objective::rub ? Norm::l1 : obj.p;
              return a;
            }()
          : parse_attack_label(o.val_attack);
  val_attack.rho = o.val_rho >= 0.0 ? scaled(o.val_rho, o.scale_rho, m) : obj.rho;
  val_attack.steps = o.attack_steps;
  val_attack.step_size = o.attack_step_size;
  val_attack.restarts = o.attack_restarts;
  val_attack.seed = seed;

  TrainHistory hist;
  TrainConfig used = cfg;
  if (!cfg.lr_grid.empty() || !cfg.rho_grid.empty()) {
    GridResult grid = grid_select(init, ds, cfg, val_attack);
    hist = std::move(grid.best);
    used = grid.best_config;
    std::cout << "selected lr=" << used.learning_rate << " rho=" << used.objective.rho
              << " (validation " << attack_label(val_attack)
              << " rho=" << val_attack.rho << ")\n";
    for (const GridCandidate& c : grid.candidates) {
      std::cout << "  candidate lr=" << c.learning_rate << " rho=" << c.rho;
      if (c.diverged) std::cout << " diverged\n";
      else std::cout << " val_adv=" << c.val_adversarial << " val_clean=" << c.val_clean << "\n";
    }
  } else {
    hist = train(init, ds, cfg);
  }

  std::string model_path = out.empty() ? "model.bin" : out;
  save_network(hist.final_params, model_path);

  // History and metadata ride along with the checkpoint.
  {
    std::ofstream os(model_path + ".history.csv");
    os << "iteration,objective\n";
    for (std::size_t i = 0; i < hist.objective_values.size(); ++i)
      os << i << ',' << hist.objective_values[i] << '\n';
  }
  nlohmann::json meta;
  meta["objective"] = objective_name(used.objective.objective);
  meta["p"] = norm_name(used.objective.p);
  meta["rho"] = used.objective.rho;
  meta["learning_rate"] = used.learning_rate;
  meta["batch_size"] = used.batch_size;
  meta["iterations"] = used.iterations;
  meta["seed"] = used.seed;
  meta["samples_per_second"] = hist.samples_per_second;
  meta["final_objective"] = hist.objective_values.back();
  {
    std::ofstream os(model_path + ".meta.json");
    os << meta.dump(2) << "\n";
  }

  Batch test = ds.batch(eval_indices(ds, "test"));
  std::cout << "trained " << objective_name(used.objective.objective) << " model: "
            << "final objective " << hist.objective_values.back() << ", test clean accuracy "
            << clean_accuracy(hist.final_params, test) << ", " << hist.samples_per_second
            << " samples/s\n";
  std::cout << "checkpoint written to " << model_path << " (+ .history.csv, .meta.json, format "
            << format << " reports come from attack/certify/report)\n";
  return 0;
}

struct AttackOpts {
  DataOpts data;
  std::string model;
  std::string attack = "pgd";
  std::string p = "inf";
  std::vector<double> rhos{0.1};
  std::size_t steps = 40;
  double step_size = 0.0;
  std::size_t restarts = 2;
  bool scale_rho = false;
};

int run_attack(const AttackOpts& o, std::uint64_t seed, const std::string& out,
               const std::string& format) {
  Dataset ds = load_data(o.data);
  NetworkParams params = load_network(o.model);
  Batch eval = ds.batch(eval_indices(ds, o.data.eval_split));
  AttackConfig cfg;
  cfg.kind = parse_attack(o.attack);
  cfg.p = parse_norm(o.p);
  cfg.steps = o.steps;
  cfg.step_size = o.step_size;
  cfg.restarts = o.restarts;
  cfg.seed = seed;

  ReportTable table;
  std::string method = model_stem(o.model);
  double clean = clean_accuracy(params, eval);
  for (double rho : o.rhos) {
    cfg.rho = scaled(rho, o.scale_rho, ds.feature_dim());
    cfg.validate();
    ReportRow& row = table.row(method, cfg.rho);
    row.clean_accuracy = clean;
    row.adversarial[attack_label(cfg)] = adversarial_accuracy(params, eval, cfg);
  }
  write_table(table, out, format);
  return 0;
}

struct CertifyOpts {
  DataOpts data;
  std::string model;
  std::vector<double> rhos{0.1};
  bool scale_rho = false;
};

int run_certify(const CertifyOpts& o, const std::string& out, const std::string& format) {
  Dataset ds = load_data(o.data);
  NetworkParams params = load_network(o.model);
  std::vector<std::size_t> idx = eval_indices(ds, o.data.eval_split);
  Batch eval = ds.batch(idx);
  ReportTable table;
  std::string method = model_stem(o.model);
  double clean = clean_accuracy(params, eval);

  nlohmann::json records = nlohmann::json::array();
  std::string rec_csv = "sample,label,predicted,certified,worst_bound,rho\n";
  for (double raw : o.rhos) {
    double rho = scaled(raw, o.scale_rho, ds.feature_dim());
    std::size_t certified = 0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      Tensor x = eval.row(i);
      CertResult res = certify_sample(params, x, eval.y[i], rho, idx[i]);
      certified += res.certified ? 1 : 0;
      std::size_t pred = predict(params, x);
      if (format == "json") {
        records.push_back({{"sample", res.sample},
                           {"label", eval.y[i]},
                           {"predicted", pred},
                           {"certified", res.certified},
                           {"worst_bound", res.worst_bound},
                           {"rho", res.rho}});
      } else {
        char line[160];
        std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%d,%.17g,%.17g\n", res.sample,
                      eval.y[i], pred, res.certified ? 1 : 0, res.worst_bound, res.rho);
        rec_csv += line;
      }
    }
    ReportRow& row = table.row(method, rho);
    row.clean_accuracy = clean;
    row.certified_accuracy = static_cast<double>(certified) / static_cast<double>(eval.size());
  }
  write_table(table, out, format);
  if (!out.empty()) {
    std::string rec_path = out + ".records." + format;
    write_text(rec_path, format == "json" ? records.dump(2) + "\n" : rec_csv);
  }
  return 0;
}

struct ReportOpts {
  DataOpts data;
  std::vector<std::string> models;
  std::vector<std::string> methods;
  std::vector<double> rhos{0.1};
  std::vector<std::string> attacks{"pgd_l1"};
  bool certify = true;
  bool scale_rho = false;
  std::string bound_holds = "none";  // none | arub | rub
  std::size_t attack_steps = 40;
  double attack_step_size = 0.0;
  std::size_t attack_restarts = 2;
};

int run_report(const ReportOpts& o, std::uint64_t seed, const std::string& out,
               const std::string& format) {
  Dataset ds = load_data(o.data);
  Batch eval = ds.batch(eval_indices(ds, o.data.eval_split));
  if (!o.methods.empty() && o.methods.size() != o.models.size())
    throw CLI::ValidationError("--methods", "needs one name per --models entry");

  ReportTable table;
  std::string bound_csv = "method,rho,objective,fraction\n";
  nlohmann::json bound_json = nlohmann::json::array();
  for (std::size_t mi = 0; mi < o.models.size(); ++mi) {
    NetworkParams params = load_network(o.models[mi]);
    std::string method = o.methods.empty() ? model_stem(o.models[mi]) : o.methods[mi];
    double clean = clean_accuracy(params, eval);
    double sps = std::numeric_limits<double>::quiet_NaN();
    {
      std::ifstream is(o.models[mi] + ".meta.json");
      if (is) {
        nlohmann::json meta = nlohmann::json::parse(is, nullptr, false);
        if (meta.is_object() && meta.contains("samples_per_second"))
          sps = meta["samples_per_second"].get<double>();
      }
    }
    for (double raw : o.rhos) {
      double rho = scaled(raw, o.scale_rho, ds.feature_dim());
      ReportRow& row = table.row(method, rho);
      row.clean_accuracy = clean;
      if (!std::isnan(sps)) row.samples_per_second = sps;
      for (const std::string& label : o.attacks) {
        AttackConfig cfg = parse_attack_label(label);
        cfg.rho = rho;
        cfg.steps = o.attack_steps;
        cfg.step_size = o.attack_step_size;
        cfg.restarts = o.attack_restarts;
        cfg.seed = seed;
        cfg.validate();
        row.adversarial[label] = adversarial_accuracy(params, eval, cfg);
      }
      if (o.certify) row.certified_accuracy = certified_accuracy(params, eval, rho);
      if (o.bound_holds != "none") {
        Objective obj = parse_objective(o.bound_holds);
        Norm p = obj == Objective::rub ? Norm::l1 : Norm::linf;
        double frac = bound_holds_fraction(params, eval, rho, p, obj, seed);
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%.17g,%s,%.17g\n", method.c_str(), rho,
                      o.bound_holds.c_str(), frac);
        bound_csv += line;
        bound_json.push_back(
            {{"method", method}, {"rho", rho}, {"objective", o.bound_holds}, {"fraction", frac}});
      }
    }
  }
  write_table(table, out, format);
  if (o.bound_holds != "none") {
    std::string text = format == "json" ? bound_json.dump(2) + "\n" : bound_csv;
    if (out.empty()) std::cout << text;
    else write_text(out + ".bound_holds." + format, text);
  }
  return 0;
}

struct RankOpts {
  std::vector<std::string> tables;
  std::string attack = "pgd_l1";
  double rho = 0.1;
};

int run_rank(const RankOpts& o, const std::string& out, const std::string& format) {
  std::vector<ReportTable> tables;
  for (const std::string& path : o.tables) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open table " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    bool json = path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0;
    tables.push_back(json ? ReportTable::from_json(text) : ReportTable::from_csv(text));
  }
  std::map<std::string, double> ranks = rank_aggregate(tables, o.attack, o.rho);
  if (format == "json") {
    nlohmann::json obj;
    for (const auto& [method, rank] : ranks) obj[method] = rank;
    write_text(out, obj.dump(2) + "\n");
  } else {
    std::string csv = "method,average_rank\n";
    for (const auto& [method, rank] : ranks) {
      char line[160];
      std::snprintf(line, sizeof(line), "%s,%.17g\n", method.c_str(), rank);
      csv += line;
    }
    write_text(out, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust training, attacks and L1 certification for dense ReLU nets"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI run configuration ([train], [attack], ... sections)");

  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  app.add_option("--seed", seed, "seed for training shuffles and attack restarts");
  app.add_option("--out", out, "output path (stdout when omitted)");
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));

  TrainOpts train_o;
  CLI::App* train_c = app.add_subcommand("train", "train a model with one of the objectives");
  add_data_opts(train_c, train_o.data);
  train_c->add_option("--widths", train_o.hidden, "hidden layer widths");
  train_c->add_option("--objective", train_o.objective, "nominal, baseline, arub or rub")
      ->check(CLI::IsMember({"nominal", "baseline", "arub", "rub"}));
  train_c->add_option("--p", train_o.p, "uncertainty set norm order: 1, 2 or inf");
  train_c->add_option("--rho", train_o.rho, "uncertainty radius");
  train_c->add_option("--lr", train_o.lr, "learning rate");
  train_c->add_option("--batch", train_o.batch, "minibatch size");
  train_c->add_option("--iters", train_o.iters, "SGD iterations");
  train_c->add_option("--lr-grid", train_o.lr_grid, "learning-rate grid (enables grid search)");
  train_c->add_option("--rho-grid", train_o.rho_grid, "rho grid (enables grid search)");
  train_c->add_flag("--scale-rho", train_o.scale_rho, "multiply rho values by sqrt(input dim)");
  train_c->add_option("--val-attack", train_o.val_attack,
                      "validation attack label (default pgd at the objective's p)");
  train_c->add_option("--val-rho", train_o.val_rho, "validation attack radius");
  train_c->add_option("--attack-steps", train_o.attack_steps, "validation PGD steps");
  train_c->add_option("--attack-step-size", train_o.attack_step_size, "validation PGD step");
  train_c->add_option("--attack-restarts", train_o.attack_restarts, "validation PGD restarts");

  AttackOpts attack_o;
  CLI::App* attack_c = app.add_subcommand("attack", "measure adversarial accuracy");
  add_data_opts(attack_c, attack_o.data);
  attack_c->add_option("--model", attack_o.model, "weight file")->required();
  attack_c->add_option("--attack", attack_o.attack, "fgsm, fgm or pgd")
      ->check(CLI::IsMember({"fgsm", "fgm", "pgd"}));
  attack_c->add_option("--p", attack_o.p, "attack norm order: 1, 2 or inf");
  attack_c->add_option("--rho", attack_o.rhos, "attack radius (repeatable)");
  attack_c->add_option("--steps", attack_o.steps, "PGD steps");
  attack_c->add_option("--step-size", attack_o.step_size, "PGD step size (0 = 2.5 rho / steps)");
  attack_c->add_option("--restarts", attack_o.restarts, "PGD restarts");
  attack_c->add_flag("--scale-rho", attack_o.scale_rho, "multiply rho values by sqrt(input dim)");

  CertifyOpts certify_o;
  CLI::App* certify_c = app.add_subcommand("certify", "L1 robustness certificates");
  add_data_opts(certify_c, certify_o.data);
  certify_c->add_option("--model", certify_o.model, "weight file")->required();
  certify_c->add_option("--rho", certify_o.rhos, "certification radius (repeatable)");
  certify_c->add_flag("--scale-rho", certify_o.scale_rho,
                      "multiply rho values by sqrt(input dim)");

  ReportOpts report_o;
  CLI::App* report_c = app.add_subcommand("report", "accuracy table across models and radii");
  add_data_opts(report_c, report_o.data);
  report_c->add_option("--models", report_o.models, "weight files (repeatable)")->required();
  report_c->add_option("--methods", report_o.methods, "row labels (default: model stems)");
  report_c->add_option("--rho", report_o.rhos, "radii (repeatable)");
  report_c->add_option("--attacks", report_o.attacks,
                       "attack labels: fgsm or {fgm,pgd}_l{1,2,inf}");
  report_c->add_flag("!--no-certify", report_o.certify, "skip the certified accuracy column");
  report_c->add_flag("--scale-rho", report_o.scale_rho, "multiply rho values by sqrt(input dim)");
  report_c->add_option("--bound-holds", report_o.bound_holds,
                       "also report the bound-holds fraction for arub or rub")
      ->check(CLI::IsMember({"none", "arub", "rub"}));
  report_c->add_option("--attack-steps", report_o.attack_steps, "PGD steps");
  report_c->add_option("--attack-step-size", report_o.attack_step_size, "PGD step size");
  report_c->add_option("--attack-restarts", report_o.attack_restarts, "PGD restarts");

  RankOpts rank_o;
  CLI::App* rank_c = app.add_subcommand("rank", "average method ranks across report tables");
  rank_c->add_option("--tables", rank_o.tables, "report tables (csv or json)")->required();
  rank_c->add_option("--attack", rank_o.attack, "attack column to rank by");
  rank_c->add_option("--rho", rank_o.rho, "radius row to rank at");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_c->parsed()) return run_train(train_o, seed, out, format);
    if (attack_c->parsed()) return run_attack(attack_o, seed, out, format);
    if (certify_c->parsed()) return run_certify(certify_o, out, format);
    if (report_c->parsed()) return run_report(report_o, seed, out, format);
    if (rank_c->parsed()) return run_rank(rank_o, out, format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
