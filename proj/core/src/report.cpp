#include "robustnet/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "robustnet/attacks.hpp"

namespace robustnet {

namespace {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool present(double v) { return !std::isnan(v); }

}  // namespace

ReportRow::ReportRow()
    : clean_accuracy(kAbsent),
      certified_accuracy(kAbsent),
      samples_per_second(kAbsent) {}

ReportRow& ReportTable::row(const std::string& method, double rho) {
  auto pos = std::find_if(rows_.begin(), rows_.end(), [&](const ReportRow& r) {
    return r.method == method && r.rho == rho;
  });
  if (pos != rows_.end()) return *pos;
  ReportRow r;
  r.method = method;
  r.rho = rho;
  auto insert_at = std::find_if(rows_.begin(), rows_.end(), [&](const ReportRow& o) {
    return o.method > method || (o.method == method && o.rho > rho);
  });
  return *rows_.insert(insert_at, std::move(r));
}

const ReportRow* ReportTable::find(const std::string& method, double rho) const {
  for (const ReportRow& r : rows_)
    if (r.method == method && r.rho == rho) return &r;
  return nullptr;
}

std::vector<std::string> ReportTable::attack_columns() const {
  std::set<std::string> cols;
  for (const ReportRow& r : rows_)
    for (const auto& [name, _] : r.adversarial) cols.insert(name);
  return {cols.begin(), cols.end()};
}

std::string ReportTable::to_csv() const {
  std::vector<std::string> attacks = attack_columns();
  std::ostringstream os;
  os << "method,rho,clean_accuracy";
  for (const std::string& a : attacks) os << ",adv_" << a;
  os << ",certified_accuracy,samples_per_second\n";
  for (const ReportRow& r : rows_) {
    os << r.method << ',' << fmt(r.rho) << ',';
    if (present(r.clean_accuracy)) os << fmt(r.clean_accuracy);
    for (const std::string& a : attacks) {
      os << ',';
      auto it = r.adversarial.find(a);
      if (it != r.adversarial.end()) os << fmt(it->second);
    }
    os << ',';
    if (present(r.certified_accuracy)) os << fmt(r.certified_accuracy);
    os << ',';
    if (present(r.samples_per_second)) os << fmt(r.samples_per_second);
    os << '\n';
  }
  return os.str();
}

ReportTable ReportTable::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("ReportTable: empty csv");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) header.push_back(field);
  }
  if (header.size() < 5 || header[0] != "method" || header[1] != "rho")
    throw std::runtime_error("ReportTable: unrecognized csv header");
  ReportTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    fields.resize(header.size());
    ReportRow& r = table.row(fields[0], std::stod(fields[1]));
    for (std::size_t c = 2; c < header.size(); ++c) {
      if (fields[c].empty()) continue;
      double v = std::stod(fields[c]);
      if (header[c] == "clean_accuracy") r.clean_accuracy = v;
      else if (header[c] == "certified_accuracy") r.certified_accuracy = v;
      else if (header[c] == "samples_per_second") r.samples_per_second = v;
      else if (header[c].rfind("adv_", 0) == 0) r.adversarial[header[c].substr(4)] = v;
      else throw std::runtime_error("ReportTable: unknown csv column " + header[c]);
    }
  }
  return table;
}

std::string ReportTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const ReportRow& r : rows_) {
    nlohmann::json o;
    o["method"] = r.method;
    o["rho"] = r.rho;
    if (present(r.clean_accuracy)) o["clean_accuracy"] = r.clean_accuracy;
    if (!r.adversarial.empty()) o["adversarial"] = r.adversarial;
    if (present(r.certified_accuracy)) o["certified_accuracy"] = r.certified_accuracy;
    if (present(r.samples_per_second)) o["samples_per_second"] = r.samples_per_second;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

ReportTable ReportTable::from_json(const std::string& text) {
  nlohmann::json arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw std::runtime_error("ReportTable: json root must be an array");
  ReportTable table;
  for (const nlohmann::json& o : arr) {
    ReportRow& r = table.row(o.at("method").get<std::string>(), o.at("rho").get<double>());
    if (o.contains("clean_accuracy")) r.clean_accuracy = o["clean_accuracy"].get<double>();
    if (o.contains("certified_accuracy"))
      r.certified_accuracy = o["certified_accuracy"].get<double>();
    if (o.contains("samples_per_second"))
      r.samples_per_second = o["samples_per_second"].get<double>();
    if (o.contains("adversarial"))
      r.adversarial = o["adversarial"].get<std::map<std::string, double>>();
  }
  return table;
}

std::map<std::string, double> rank_aggregate(const std::vector<ReportTable>& tables,
                                             const std::string& attack, double rho) {
  if (tables.empty()) throw std::invalid_argument("rank_aggregate: no tables");
  std::set<std::string> methods;
  for (const ReportRow& r : tables.front().rows())
    if (r.rho == rho) methods.insert(r.method);
  if (methods.empty())
    throw std::invalid_argument("rank_aggregate: first table has no rows at the given rho");

  std::map<std::string, double> rank_sum;
  for (const ReportTable& table : tables) {
    std::vector<std::pair<std::string, double>> scores;
    for (const std::string& m : methods) {
      const ReportRow* r = table.find(m, rho);
      if (!r) throw std::invalid_argument("rank_aggregate: method '" + m +
                                          "' missing at rho " + fmt(rho));
      auto it = r->adversarial.find(attack);
      if (it == r->adversarial.end())
        throw std::invalid_argument("rank_aggregate: attack column '" + attack +
                                    "' missing for method '" + m + "'");
      scores.emplace_back(m, it->second);
    }
    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
      return a.second > b.second || (a.second == b.second && a.first < b.first);
    });
    // Each tie group shares the mean of the positions it occupies.
    std::size_t i = 0;
    while (i < scores.size()) {
      std::size_t j = i;
      while (j + 1 < scores.size() && scores[j + 1].second == scores[i].second) ++j;
      double mean_rank = static_cast<double>(i + 1 + j + 1) / 2.0;
      for (std::size_t k = i; k <= j; ++k) rank_sum[scores[k].first] += mean_rank;
      i = j + 1;
    }
  }
  for (auto& [_, v] : rank_sum) v /= static_cast<double>(tables.size());
  return rank_sum;
}

double bound_holds_fraction(const NetworkParams& params, const Batch& batch, double rho,
                            Norm p, Objective objective, std::uint64_t seed) {
  if (batch.size() == 0) throw std::invalid_argument("bound_holds_fraction: empty dataset");
  if (objective != Objective::arub && objective != Objective::rub)
    throw std::invalid_argument("bound_holds_fraction: objective must be arub or rub");
  RobustConfig cfg{objective, p, rho};
  cfg.validate();
  AttackConfig attack;
  attack.kind = AttackKind::pgd;
  attack.p = p;
  attack.rho = rho;
  attack.seed = seed;
  Rng base(seed);
  std::size_t holds = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tensor x = batch.row(i);
    std::size_t y = batch.y[i];
    double value = sample_objective_value(params, x, y, cfg);
    AttackConfig per = attack;
    per.seed = base.fork(i).seed();
    Tensor delta = pgd(params, x, y, per);
    Tensor xadv = x;
    for (std::size_t c = 0; c < xadv.size(); ++c) xadv[c] += delta[c];
    double adv_ce = cross_entropy(y, forward(params, xadv).logits());
    if (value >= adv_ce - 1e-9) ++holds;
  }
  return static_cast<double>(holds) / static_cast<double>(batch.size());
}

}  // namespace robustnet
