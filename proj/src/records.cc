// Copyright 2026 The MyoCtl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// CSV persistence and per-trial statistics for scenario records.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "myoctl/harness.h"

namespace myoctl {
namespace {

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct Moments {
  int n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  void Add(double v) {
    ++n;
    sum += v;
    sum_sq += v * v;
  }
  double Mean() const { return n ? sum / n : 0.0; }
  double Std() const {
    if (n == 0) return 0.0;
    const double m = Mean();
    return std::sqrt(std::max(0.0, sum_sq / n - m * m));
  }
};

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string RecordsHeader(bool with_err_mm) {
  std::string h =
      "scenario,seed,phase,rand_idx,trial_idx,err_deg,tension_N,dl_norm_mm";
  if (with_err_mm) h += ",err_mm";
  return h;
}

std::string SummaryHeader(bool with_err_mm) {
  std::string h =
      "scenario,seed,phase,trial_idx,n,err_deg_mean,err_deg_std,"
      "tension_N_mean,tension_N_std,dl_norm_mm_mean,dl_norm_mm_std";
  if (with_err_mm) h += ",err_mm_mean,err_mm_std";
  return h;
}

std::vector<SummaryRow> Summarize(const std::vector<TrialRecord>& records) {
  struct Group {
    SummaryRow row;
    Moments err, tension, dl, mm;
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, int>, std::size_t> index;
  for (const TrialRecord& r : records) {
    const auto key = std::make_pair(r.phase, r.trial_idx);
    auto it = index.find(key);
    if (it == index.end()) {
      Group g;
      g.row.scenario = r.scenario;
      g.row.seed = r.seed;
      g.row.phase = r.phase;
      g.row.trial_idx = r.trial_idx;
      it = index.emplace(key, groups.size()).first;
      groups.push_back(g);
    }
    Group& g = groups[it->second];
    g.err.Add(r.err_deg);
    g.tension.Add(r.tension_n);
    g.dl.Add(r.dl_norm_mm);
    if (r.err_mm) g.mm.Add(*r.err_mm);
  }
  std::vector<SummaryRow> rows;
  rows.reserve(groups.size());
  for (Group& g : groups) {
    g.row.count = g.err.n;
    g.row.err_mean = g.err.Mean();
    g.row.err_std = g.err.Std();
    g.row.tension_mean = g.tension.Mean();
    g.row.tension_std = g.tension.Std();
    g.row.dl_mean = g.dl.Mean();
    g.row.dl_std = g.dl.Std();
    if (g.mm.n > 0) {
      g.row.err_mm_mean = g.mm.Mean();
      g.row.err_mm_std = g.mm.Std();
    }
    rows.push_back(g.row);
  }
  return rows;
}

void WriteRecords(const std::vector<TrialRecord>& records,
                  const std::filesystem::path& path) {
  bool with_mm = false;
  for (const TrialRecord& r : records)
    with_mm = with_mm || r.err_mm.has_value();
  std::string text = RecordsHeader(with_mm) + "\n";
  for (const TrialRecord& r : records) {
    text += r.scenario + "," + std::to_string(r.seed) + "," + r.phase + "," +
            std::to_string(r.rand_idx) + "," + std::to_string(r.trial_idx) +
            "," + Num(r.err_deg) + "," + Num(r.tension_n) + "," +
            Num(r.dl_norm_mm);
    if (with_mm) text += "," + (r.err_mm ? Num(*r.err_mm) : std::string());
    text += "\n";
  }
  WriteText(path, text);
}

void WriteSummary(const std::vector<SummaryRow>& rows,
                  const std::filesystem::path& path) {
  bool with_mm = false;
  for (const SummaryRow& r : rows)
    with_mm = with_mm || r.err_mm_mean.has_value();
  std::string text = SummaryHeader(with_mm) + "\n";
  for (const SummaryRow& r : rows) {
    text += r.scenario + "," + std::to_string(r.seed) + "," + r.phase + "," +
            std::to_string(r.trial_idx) + "," + std::to_string(r.count) + "," +
            Num(r.err_mean) + "," + Num(r.err_std) + "," + Num(r.tension_mean) +
            "," + Num(r.tension_std) + "," + Num(r.dl_mean) + "," +
            Num(r.dl_std);
    if (with_mm) {
      text += "," + (r.err_mm_mean ? Num(*r.err_mm_mean) : std::string()) +
              "," + (r.err_mm_std ? Num(*r.err_mm_std) : std::string());
    }
    text += "\n";
  }
  WriteText(path, text);
}

std::vector<TrialRecord> ParseRecords(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("records CSV is empty");
  bool with_mm = false;
  if (line == RecordsHeader(true)) {
    with_mm = true;
  } else if (line != RecordsHeader(false)) {
    throw std::runtime_error("unexpected records header: " + line);
  }
  const std::size_t columns = with_mm ? 9 : 8;
  std::vector<TrialRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> c = SplitCsv(line);
    if (c.size() != columns) {
      throw std::runtime_error("records CSV line " + std::to_string(line_no) +
                               ": expected " + std::to_string(columns) +
                               " fields");
    }
    try {
      TrialRecord r;
      r.scenario = c[0];
      r.seed = std::stoull(c[1]);
      r.phase = c[2];
      r.rand_idx = std::stoi(c[3]);
      r.trial_idx = std::stoi(c[4]);
      r.err_deg = std::stod(c[5]);
      r.tension_n = std::stod(c[6]);
      r.dl_norm_mm = std::stod(c[7]);
      if (with_mm && !c[8].empty()) r.err_mm = std::stod(c[8]);
      records.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw std::runtime_error("records CSV line " + std::to_string(line_no) +
                               ": malformed number");
    }
  }
  return records;
}

std::vector<TrialRecord> ReadRecords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return ParseRecords(text.str());
}

void WriteHysteresis(const std::vector<HysteresisLoop>& loops,
                     const std::filesystem::path& path) {
  std::string text = "loop,step,direction,theta_deg\n";
  for (std::size_t l = 0; l < loops.size(); ++l) {
    for (std::size_t s = 0; s < loops[l].down_deg.size(); ++s) {
      text += std::to_string(l) + "," + std::to_string(s) + ",down," +
              Num(loops[l].down_deg[s]) + "\n";
    }
    for (std::size_t s = 0; s < loops[l].up_deg.size(); ++s) {
      text += std::to_string(l) + "," + std::to_string(s) + ",up," +
              Num(loops[l].up_deg[s]) + "\n";
    }
  }
  WriteText(path, text);
}

std::vector<double> MeanByTrial(const std::vector<TrialRecord>& records,
                                const std::string& phase,
                                double TrialRecord::* field) {
  std::vector<Moments> m;
  for (const TrialRecord& r : records) {
    if (r.phase != phase) continue;
    if (r.trial_idx >= static_cast<int>(m.size())) m.resize(r.trial_idx + 1);
    m[r.trial_idx].Add(r.*field);
  }
  std::vector<double> out;
  for (const Moments& x : m) out.push_back(x.Mean());
  return out;
}

double Slope(const std::vector<double>& y) {
  const int n = static_cast<int>(y.size());
  if (n < 2) return 0.0;
  const double x_mean = (n - 1) / 2.0;
  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (i - x_mean) * (y[i] - y_mean);
    den += (i - x_mean) * (i - x_mean);
  }
  return num / den;
}

}  // namespace myoctl
