/*
 * Copyright 2026 The slidetune Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "slidetune/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "slidetune/errors.hpp"

namespace slidetune {
namespace {

std::string F4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string F6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string CiCell(const MetricEstimate& e) {
  return F4(e.point) + " (" + F4(e.lower) + "-" + F4(e.upper) + ")";
}

std::string SpreadCell(const MeanStd& m) { return F4(m.mean) + " +/- " + F4(m.stddev); }

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

MetricEstimate MeanEstimate(const std::vector<MetricEstimate>& es) {
  MetricEstimate m;
  if (es.empty()) return m;
  for (const auto& e : es) {
    m.point += e.point;
    m.lower += e.lower;
    m.upper += e.upper;
  }
  const double n = static_cast<double>(es.size());
  m.point /= n;
  m.lower /= n;
  m.upper /= n;
  return m;
}

std::size_t ShotsOf(const std::string& cell) {
  if (cell.rfind("K=", 0) != 0) return 0;
  return static_cast<std::size_t>(std::stoull(cell.substr(2)));
}

std::string DisplayName(const std::string& spec_text) {
  const ModelSpec spec = ModelSpec::FromCanonicalText(spec_text);
  std::string pool = spec.aggregator.kind == AggregatorKind::kMean ? "Mean" : "Max";
  std::string act;
  switch (spec.activation) {
    case ActivationKind::kReLU: act = "ReLU"; break;
    case ActivationKind::kGeLU: act = "GeLU"; break;
    case ActivationKind::kSwiGLU: act = "SwiGLU"; break;
  }
  if (spec.head == HeadKind::kLinear) act = "Linear";
  return pool + " + " + act;
}

// Order of first appearance of each method.
std::vector<std::string> MethodOrder(std::span<const RunRecord> records) {
  std::vector<std::string> order;
  for (const RunRecord& r : records)
    if (std::find(order.begin(), order.end(), r.method) == order.end())
      order.push_back(r.method);
  return order;
}

void RequireRecords(std::span<const RunRecord> records) {
  if (records.empty()) throw ConfigError("no records");
}

}  // namespace

std::string Table::ToCsv() const {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << CsvField(cells[i]);
    out << "\n";
  };
  line(header);
  for (const auto& row : rows) line(row);
  return out.str();
}

std::string Table::ToText() const {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    std::string text;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      if (c) text += "  ";
      text += cell;
      if (c + 1 < width.size()) text.append(width[c] - cell.size(), ' ');
    }
    out << text << "\n";
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
  out << std::string(total, '-') << "\n";
  for (const auto& row : rows) line(row);
  return out.str();
}

std::vector<GroupSummary> SummarizeRecords(std::span<const RunRecord> records) {
  std::vector<GroupSummary> groups;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  std::vector<std::vector<MetricEstimate>> ba, auc, f1;
  for (const RunRecord& r : records) {
    const auto key = std::make_tuple(r.method, r.cell, r.test_name);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      GroupSummary g;
      g.protocol = r.protocol;
      g.method = r.method;
      g.spec = r.spec;
      g.cell = r.cell;
      g.test_name = r.test_name;
      g.internal = r.internal;
      groups.push_back(std::move(g));
      ba.emplace_back();
      auc.emplace_back();
      f1.emplace_back();
    }
    const std::size_t gi = it->second;
    GroupSummary& g = groups[gi];
    if (!r.ok) {
      g.failed_seeds.push_back(r.seed);
      continue;
    }
    g.seeds.push_back(r.seed);
    g.balanced_accuracy.push_back(r.report.balanced_accuracy.point);
    ba[gi].push_back(r.report.balanced_accuracy);
    auc[gi].push_back(r.report.roc_auc);
    f1[gi].push_back(r.report.weighted_f1);
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    GroupSummary& g = groups[gi];
    if (g.seeds.empty()) continue;
    auto points = [](const std::vector<MetricEstimate>& es) {
      std::vector<double> v;
      for (const auto& e : es) v.push_back(e.point);
      return v;
    };
    g.bal_acc = ComputeMeanStd(points(ba[gi]));
    g.roc_auc = ComputeMeanStd(points(auc[gi]));
    g.weighted_f1 = ComputeMeanStd(points(f1[gi]));
    g.mean_bal_acc = MeanEstimate(ba[gi]);
    g.mean_roc_auc = MeanEstimate(auc[gi]);
    g.mean_weighted_f1 = MeanEstimate(f1[gi]);
  }
  return groups;
}

RenderedTable BenchmarkTable(std::span<const RunRecord> records) {
  RequireRecords(records);
  std::vector<GroupSummary> groups = SummarizeRecords(records);
  std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    if (a.seeds.empty() != b.seeds.empty()) return b.seeds.empty();
    return a.bal_acc.mean > b.bal_acc.mean;
  });
  double best[3] = {-1.0, -1.0, -1.0};
  for (const auto& g : groups) {
    if (g.seeds.empty()) continue;
    best[0] = std::max(best[0], g.bal_acc.mean);
    best[1] = std::max(best[1], g.roc_auc.mean);
    best[2] = std::max(best[2], g.weighted_f1.mean);
  }

  RenderedTable t;
  t.name = "benchmark_summary";
  t.title = "Methods ranked by seed-mean balanced accuracy";
  t.csv.header = {"rank", "method", "test", "n_ok", "n_failed",
                  "bal_acc_mean", "bal_acc_std", "bal_acc_ci_lower", "bal_acc_ci_upper",
                  "roc_auc_mean", "roc_auc_std", "roc_auc_ci_lower", "roc_auc_ci_upper",
                  "weighted_f1_mean", "weighted_f1_std", "weighted_f1_ci_lower",
                  "weighted_f1_ci_upper"};
  t.text.header = {"rank", "method", "seeds", "Bal ACC", "ROC AUC", "Weighted F1",
                   "Bal ACC std"};
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const GroupSummary& g = groups[i];
    const std::string rank = g.seeds.empty() ? "-" : std::to_string(i + 1);
    const std::string runs = std::to_string(g.n_ok()) + "/" +
                             std::to_string(g.n_ok() + g.failed_seeds.size());
    if (g.seeds.empty()) {
      t.csv.rows.push_back({rank, g.method, g.test_name, "0",
                            std::to_string(g.failed_seeds.size()), "", "", "", "", "",
                            "", "", "", "", "", "", ""});
      t.text.rows.push_back({rank, g.method, runs, "gap", "gap", "gap", "gap"});
      continue;
    }
    t.csv.rows.push_back(
        {rank, g.method, g.test_name, std::to_string(g.n_ok()),
         std::to_string(g.failed_seeds.size()), F6(g.bal_acc.mean), F6(g.bal_acc.stddev),
         F6(g.mean_bal_acc.lower), F6(g.mean_bal_acc.upper), F6(g.roc_auc.mean),
         F6(g.roc_auc.stddev), F6(g.mean_roc_auc.lower), F6(g.mean_roc_auc.upper),
         F6(g.weighted_f1.mean), F6(g.weighted_f1.stddev), F6(g.mean_weighted_f1.lower),
         F6(g.mean_weighted_f1.upper)});
    auto star = [](double v, double b) { return v == b ? std::string("*") : std::string(); };
    t.text.rows.push_back({rank, g.method, runs,
                           CiCell(g.mean_bal_acc) + star(g.bal_acc.mean, best[0]),
                           CiCell(g.mean_roc_auc) + star(g.roc_auc.mean, best[1]),
                           CiCell(g.mean_weighted_f1) + star(g.weighted_f1.mean, best[2]),
                           F4(g.bal_acc.stddev)});
  }
  return t;
}

RenderedTable PairedSeedTable(std::span<const RunRecord> records) {
  RequireRecords(records);
  const std::vector<std::string> methods = MethodOrder(records);
  std::vector<std::uint64_t> seeds;
  std::map<std::pair<std::uint64_t, std::string>, const RunRecord*> cell;
  for (const RunRecord& r : records) {
    if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
    cell.emplace(std::make_pair(r.seed, r.method), &r);
  }
  RenderedTable t;
  t.name = "benchmark_paired";
  t.title = "Balanced accuracy per seed (paired across methods)";
  t.csv.header = {"seed"};
  for (const auto& m : methods) t.csv.header.push_back(m);
  t.text.header = t.csv.header;
  for (std::uint64_t s : seeds) {
    std::vector<std::string> csv_row{std::to_string(s)};
    std::vector<std::string> text_row{std::to_string(s)};
    for (const auto& m : methods) {
      const auto it = cell.find({s, m});
      if (it == cell.end() || !it->second->ok) {
        csv_row.push_back("");
        text_row.push_back(it == cell.end() ? "-" : "gap");
      } else {
        csv_row.push_back(F6(it->second->report.balanced_accuracy.point));
        text_row.push_back(F4(it->second->report.balanced_accuracy.point));
      }
    }
    t.csv.rows.push_back(std::move(csv_row));
    t.text.rows.push_back(std::move(text_row));
  }
  return t;
}

RenderedTable FewShotCurveTable(std::span<const RunRecord> records) {
  RequireRecords(records);
  std::vector<GroupSummary> groups = SummarizeRecords(records);
  const std::vector<std::string> methods = MethodOrder(records);
  auto rank = [&](const std::string& m) {
    return std::find(methods.begin(), methods.end(), m) - methods.begin();
  };
  std::stable_sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
    if (a.method != b.method) return rank(a.method) < rank(b.method);
    return ShotsOf(a.cell) < ShotsOf(b.cell);
  });
  RenderedTable t;
  t.name = "fewshot_curve";
  t.title = "Few-shot curve: mean and std over seeds";
  t.csv.header = {"method", "k", "n_ok", "n_failed", "bal_acc_mean", "bal_acc_std",
                  "roc_auc_mean", "roc_auc_std", "weighted_f1_mean", "weighted_f1_std"};
  t.text.header = {"method", "K", "seeds", "Bal ACC", "ROC AUC", "Weighted F1"};
  for (const GroupSummary& g : groups) {
    const std::string k = std::to_string(ShotsOf(g.cell));
    const std::string runs = std::to_string(g.n_ok()) + "/" +
                             std::to_string(g.n_ok() + g.failed_seeds.size());
    if (g.seeds.empty()) {
      t.csv.rows.push_back({g.method, k, "0", std::to_string(g.failed_seeds.size()),
                            "", "", "", "", "", ""});
      t.text.rows.push_back({g.method, k, runs, "gap", "gap", "gap"});
      continue;
    }
    t.csv.rows.push_back({g.method, k, std::to_string(g.n_ok()),
                          std::to_string(g.failed_seeds.size()), F6(g.bal_acc.mean),
                          F6(g.bal_acc.stddev), F6(g.roc_auc.mean), F6(g.roc_auc.stddev),
                          F6(g.weighted_f1.mean), F6(g.weighted_f1.stddev)});
    t.text.rows.push_back({g.method, k, runs, SpreadCell(g.bal_acc),
                           SpreadCell(g.roc_auc), SpreadCell(g.weighted_f1)});
  }
  return t;
}

RenderedTable TransferStabilityTable(std::span<const RunRecord> records) {
  RequireRecords(records);
  const std::vector<GroupSummary> groups = SummarizeRecords(records);
  RenderedTable t;
  t.name = "transfer_stability";
  t.title = "Transfer stability: mean and std over seeds per test cohort";
  t.csv.header = {"method", "cohort", "role", "n_ok", "n_failed", "bal_acc_mean",
                  "bal_acc_std", "roc_auc_mean", "roc_auc_std", "weighted_f1_mean",
                  "weighted_f1_std"};
  t.text.header = {"method", "cohort", "role", "seeds", "Bal ACC", "ROC AUC",
                   "Weighted F1"};
  for (const GroupSummary& g : groups) {
    const std::string role = g.internal ? "internal" : "external";
    const std::string runs = std::to_string(g.n_ok()) + "/" +
                             std::to_string(g.n_ok() + g.failed_seeds.size());
    if (g.seeds.empty()) {
      t.csv.rows.push_back({g.method, g.test_name, role, "0",
                            std::to_string(g.failed_seeds.size()), "", "", "", "", "", ""});
      t.text.rows.push_back({g.method, g.test_name, role, runs, "gap", "gap", "gap"});
      continue;
    }
    t.csv.rows.push_back({g.method, g.test_name, role, std::to_string(g.n_ok()),
                          std::to_string(g.failed_seeds.size()), F6(g.bal_acc.mean),
                          F6(g.bal_acc.stddev), F6(g.roc_auc.mean), F6(g.roc_auc.stddev),
                          F6(g.weighted_f1.mean), F6(g.weighted_f1.stddev)});
    t.text.rows.push_back({g.method, g.test_name, role, runs, SpreadCell(g.bal_acc),
                           SpreadCell(g.roc_auc), SpreadCell(g.weighted_f1)});
  }
  return t;
}

RenderedTable AblationTable(std::span<const RunRecord> records) {
  RequireRecords(records);
  const std::vector<GroupSummary> groups = SummarizeRecords(records);
  RenderedTable t;
  t.name = "ablation_grid";
  t.title = "Pooling x activation ablation (seed means, bootstrap CI)";
  t.csv.header = {"configuration", "pooling", "activation", "n_ok", "n_failed",
                  "bal_acc_mean", "bal_acc_ci_lower", "bal_acc_ci_upper",
                  "roc_auc_mean", "roc_auc_ci_lower", "roc_auc_ci_upper",
                  "weighted_f1_mean", "weighted_f1_ci_lower", "weighted_f1_ci_upper"};
  t.text.header = {"Configuration", "seeds", "Bal ACC", "ROC AUC", "Weighted F1"};
  for (const GroupSummary& g : groups) {
    const ModelSpec spec = ModelSpec::FromCanonicalText(g.spec);
    const std::string name = DisplayName(g.spec);
    const std::string runs = std::to_string(g.n_ok()) + "/" +
                             std::to_string(g.n_ok() + g.failed_seeds.size());
    std::vector<std::string> csv_row{name, AggregatorName(spec.aggregator.kind),
                                     ActivationName(spec.activation),
                                     std::to_string(g.n_ok()),
                                     std::to_string(g.failed_seeds.size())};
    if (g.seeds.empty()) {
      csv_row.resize(t.csv.header.size());
      t.csv.rows.push_back(std::move(csv_row));
      t.text.rows.push_back({name, runs, "gap", "gap", "gap"});
      continue;
    }
    for (const MetricEstimate* e : {&g.mean_bal_acc, &g.mean_roc_auc, &g.mean_weighted_f1}) {
      csv_row.push_back(F6(e->point));
      csv_row.push_back(F6(e->lower));
      csv_row.push_back(F6(e->upper));
    }
    t.csv.rows.push_back(std::move(csv_row));
    t.text.rows.push_back({name, runs, CiCell(g.mean_bal_acc), CiCell(g.mean_roc_auc),
                           CiCell(g.mean_weighted_f1)});
  }
  return t;
}

std::vector<RenderedTable> RenderSummary(std::span<const RunRecord> records) {
  RequireRecords(records);
  std::set<std::string> hashes;
  std::set<Protocol> protocols;
  for (const RunRecord& r : records) {
    hashes.insert(r.plan_hash);
    protocols.insert(r.protocol);
  }
  if (protocols.size() > 1) throw ConfigError("records mix several protocols");
  if (hashes.size() > 1)
    throw ConfigError("records come from " + std::to_string(hashes.size()) +
                      " different plans");
  switch (records.front().protocol) {
    case Protocol::kBenchmark: return {BenchmarkTable(records), PairedSeedTable(records)};
    case Protocol::kFewShot: return {FewShotCurveTable(records)};
    case Protocol::kTransfer: return {TransferStabilityTable(records)};
    case Protocol::kAblation: return {AblationTable(records)};
  }
  throw ConfigError("unknown protocol");
}

std::vector<RunRecord> LatestPlanRecords(std::span<const RunRecord> records) {
  RequireRecords(records);
  const std::string& hash = records.back().plan_hash;
  // A rerun of the same plan appends a second copy of each run; keep the
  // latest copy in the position of the first.
  std::vector<RunRecord> out;
  std::map<std::tuple<std::string, std::uint64_t, std::string, std::string>, std::size_t> slot;
  for (const RunRecord& r : records) {
    if (r.plan_hash != hash) continue;
    const auto key = std::make_tuple(r.method, r.seed, r.cell, r.test_name);
    const auto [it, inserted] = slot.emplace(key, out.size());
    if (inserted) {
      out.push_back(r);
    } else {
      out[it->second] = r;
    }
  }
  return out;
}

void WriteTables(const std::filesystem::path& dir, std::span<const RenderedTable> tables) {
  std::filesystem::create_directories(dir);
  for (const RenderedTable& t : tables) {
    for (const auto& [ext, body] :
         {std::pair{".csv", t.csv.ToCsv()}, std::pair{".txt", t.title + "\n\n" + t.text.ToText()}}) {
      const auto path = dir / (t.name + ext);
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << body;
      if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
    }
  }
}

std::string TablesToText(std::span<const RenderedTable> tables) {
  std::string out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) out += "\n";
    out += tables[i].title + "\n\n" + tables[i].text.ToText();
  }
  return out;
}

}  // namespace slidetune
