#include "medsr/study.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "medsr/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace medsr {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string exposed_id(int factor, const std::string& dir) { return "x" + std::to_string(factor) + "-" + dir; }

bool valid_annotator(const std::string& a) {
  if (a.empty() || a.size() > 64) return false;
  return std::all_of(a.begin(), a.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-' || c == '.'; });
}

void require_annotator(const std::string& a) {
  if (!valid_annotator(a)) throw StudyBadRequest("annotator must be 1-64 characters of [A-Za-z0-9_.-]");
}

void require_factor(int factor) {
  if (factor != 2 && factor != 4) throw StudyBadRequest("factor must be 2 or 4");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct VoteRecord {
  std::string annotator;
  int factor = 0;
  std::string pair_id;
  std::string chosen_method;
  std::string rejected_method;
};

std::optional<VoteRecord> parse_record(const std::string& line) {
  try {
    const json j = json::parse(line);
    VoteRecord r;
    r.annotator = j.at("annotator_id").get<std::string>();
    r.factor = j.at("factor").get<int>();
    r.pair_id = j.at("pair_id").get<std::string>();
    r.chosen_method = j.at("chosen_method").get<std::string>();
    if (j.contains("rejected_method")) r.rejected_method = j["rejected_method"].get<std::string>();
    if (r.annotator.empty() || r.pair_id.empty() || r.chosen_method.empty()) return std::nullopt;
    return r;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

StudyReport aggregate(const std::vector<VoteRecord>& records, std::size_t skipped) {
  // last vote wins per (annotator, factor, pair)
  std::map<std::tuple<std::string, int, std::string>, std::string> final_votes;
  std::map<int, std::set<std::string>> methods;
  for (const auto& r : records) {
    final_votes[{r.annotator, r.factor, r.pair_id}] = r.chosen_method;
    methods[r.factor].insert(r.chosen_method);
    if (!r.rejected_method.empty()) methods[r.factor].insert(r.rejected_method);
  }
  StudyReport report;
  report.records = records.size();
  report.skipped_lines = skipped;
  for (auto& [factor, names] : methods) report.methods[factor] = {names.begin(), names.end()};

  std::map<std::string, StudyReport::Row> rows;
  std::map<int, std::map<std::string, std::size_t>> totals;
  for (const auto& [key, method] : final_votes) {
    const auto& [annotator, factor, pair] = key;
    auto& row = rows[annotator];
    row.annotator = annotator;
    row.counts[factor][method]++;
    totals[factor][method]++;
  }
  for (auto& [name, row] : rows) report.rows.push_back(row);
  for (const auto& [factor, names] : report.methods) {
    std::size_t all = 0;
    for (const auto& [m, n] : totals[factor]) all += n;
    for (const auto& m : names) {
      report.overall_percent[factor][m] = all ? 100.0 * static_cast<double>(totals[factor][m]) / all : 0.0;
    }
  }
  return report;
}

}  // namespace

StudyService::StudyService(fs::path results_dir, std::uint64_t seed, fs::path votes_file)
    : results_dir_(std::move(results_dir)), seed_(seed) {
  const fs::path methods_path = results_dir_ / "methods.json";
  std::ifstream in(methods_path);
  if (!in) throw std::runtime_error(methods_path.string() + ": cannot open");
  try {
    const json j = json::parse(in);
    method_a_ = j.at("method_a").get<std::string>();
    method_b_ = j.at("method_b").get<std::string>();
  } catch (const json::exception& e) {
    throw std::runtime_error(methods_path.string() + ": " + e.what());
  }
  if (method_a_ == method_b_) throw std::runtime_error(methods_path.string() + ": methods must differ");

  for (int factor : {2, 4}) {
    const fs::path dir = results_dir_ / ("x" + std::to_string(factor));
    if (!fs::is_directory(dir)) continue;
    Pool p;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_directory()) continue;
      const auto name = e.path().filename().string();
      if (!valid_annotator(name)) continue;  // same safe character set as ids
      bool complete = true;
      for (const char* f : {"original.png", "method_a.png", "method_b.png"}) complete &= fs::exists(e.path() / f);
      if (complete) p.pairs.push_back(name);
    }
    std::sort(p.pairs.begin(), p.pairs.end());
    if (!p.pairs.empty() && p.pairs.size() < kPairsPerSession) {
      std::cerr << "study: factor " << factor << " pool holds " << p.pairs.size() << " pairs, sessions will have "
                << p.pairs.size() << " instead of " << kPairsPerSession << "\n";
    }
    if (!p.pairs.empty()) pools_[factor] = std::move(p);
  }

  // Replay earlier votes so sessions resume where they stopped.
  {
    std::ifstream log(votes_file);
    std::string line;
    while (std::getline(log, line)) {
      if (const auto r = parse_record(line)) votes_[{r->annotator, r->factor}][r->pair_id] = r->chosen_method;
    }
  }
  votes_fd_ = ::open(votes_file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (votes_fd_ < 0) throw std::runtime_error(votes_file.string() + ": " + std::strerror(errno));
}

StudyService::~StudyService() {
  if (votes_fd_ >= 0) ::close(votes_fd_);
}

const StudyService::Pool& StudyService::pool(int factor) const {
  require_factor(factor);
  const auto it = pools_.find(factor);
  if (it == pools_.end()) throw StudyNotFound("no study pairs for factor " + std::to_string(factor));
  return it->second;
}

std::vector<StudyService::PairSlot> StudyService::session_pairs(const std::string& annotator, int factor) const {
  require_annotator(annotator);
  std::vector<std::string> order = pool(factor).pairs;
  std::mt19937_64 rng(derive_seed(seed_, fnv1a(annotator), static_cast<std::uint64_t>(factor)));
  std::shuffle(order.begin(), order.end(), rng);
  if (order.size() > kPairsPerSession) order.resize(kPairsPerSession);
  std::vector<PairSlot> slots;
  for (const auto& dir : order) {
    const std::string id = exposed_id(factor, dir);
    const auto h = derive_seed(seed_, fnv1a(annotator) ^ fnv1a(id), static_cast<std::uint64_t>(factor));
    slots.push_back({id, (h & 1) == 0});
  }
  return slots;
}

json StudyService::session(const std::string& annotator, int factor) const {
  const auto slots = session_pairs(annotator, factor);
  std::lock_guard lock(mutex_);
  const auto vit = votes_.find({annotator, factor});
  json pairs = json::array();
  std::size_t done = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& id = slots[i].pair_id;
    const bool voted = vit != votes_.end() && vit->second.count(id);
    done += voted;
    const std::string base = "/api/image/" + id + "/";
    const std::string q = "?annotator=" + annotator;
    pairs.push_back({{"index", i},
                     {"pair_id", id},
                     {"voted", voted},
                     {"images", {{"original", base + "original" + q}, {"left", base + "left" + q},
                                 {"right", base + "right" + q}}}});
  }
  json out = {{"annotator", annotator},
              {"factor", factor},
              {"total", slots.size()},
              {"completed", done},
              {"finished", done == slots.size()},
              {"pairs", pairs}};
  if (done == slots.size()) {
    json summary = {{method_a_, 0}, {method_b_, 0}};
    for (const auto& s : slots) summary[vit->second.at(s.pair_id)] = summary[vit->second.at(s.pair_id)].get<int>() + 1;
    out["summary"] = summary;
  }
  return out;
}

fs::path StudyService::pair_dir(const std::string& pair_id, int& factor) const {
  if (pair_id.size() < 4 || pair_id[0] != 'x' || pair_id[2] != '-' || (pair_id[1] != '2' && pair_id[1] != '4')) {
    throw StudyNotFound("unknown pair '" + pair_id + "'");
  }
  factor = pair_id[1] - '0';
  const std::string dir = pair_id.substr(3);
  const auto it = pools_.find(factor);
  if (it == pools_.end() || !std::binary_search(it->second.pairs.begin(), it->second.pairs.end(), dir)) {
    throw StudyNotFound("unknown pair '" + pair_id + "'");
  }
  return results_dir_ / ("x" + std::to_string(factor)) / dir;
}

fs::path StudyService::image(const std::string& annotator, const std::string& pair_id, const std::string& role) const {
  require_annotator(annotator);
  int factor = 0;
  const fs::path dir = pair_dir(pair_id, factor);
  if (role == "original") return dir / "original.png";
  if (role != "left" && role != "right") throw StudyNotFound("unknown image role '" + role + "'");
  const auto slots = session_pairs(annotator, factor);
  const auto it = std::find_if(slots.begin(), slots.end(), [&](const PairSlot& s) { return s.pair_id == pair_id; });
  if (it == slots.end()) throw StudyNotFound("pair '" + pair_id + "' is not in this annotator's session");
  const bool want_a = (role == "left") == it->method_a_on_left;
  return dir / (want_a ? "method_a.png" : "method_b.png");
}

json StudyService::vote(const json& body) {
  if (!body.is_object()) throw StudyBadRequest("vote body must be a JSON object");
  std::string annotator, pair_id, side;
  int factor = 0;
  try {
    annotator = body.at("annotator").get<std::string>();
    factor = body.at("factor").get<int>();
    pair_id = body.at("pair_id").get<std::string>();
    side = body.at("side").get<std::string>();
  } catch (const json::exception&) {
    throw StudyBadRequest("vote needs string annotator, integer factor, string pair_id and string side");
  }
  require_annotator(annotator);
  require_factor(factor);
  if (side != "left" && side != "right") throw StudyBadRequest("side must be 'left' or 'right'");

  const auto slots = session_pairs(annotator, factor);
  const auto it = std::find_if(slots.begin(), slots.end(), [&](const PairSlot& s) { return s.pair_id == pair_id; });
  if (it == slots.end()) throw StudyNotFound("pair '" + pair_id + "' is not in this session");
  const bool chose_a = (side == "left") == it->method_a_on_left;
  const std::string& chosen = chose_a ? method_a_ : method_b_;
  const std::string& rejected = chose_a ? method_b_ : method_a_;

  const json record = {{"annotator_id", annotator}, {"factor", factor},         {"pair_id", pair_id},
                       {"chosen_side", side},       {"chosen_method", chosen}, {"rejected_method", rejected},
                       {"timestamp", utc_timestamp()}};
  const std::string line = record.dump() + "\n";

  std::lock_guard lock(mutex_);
  // One write() per record on an O_APPEND descriptor keeps lines whole.
  const ssize_t written = ::write(votes_fd_, line.data(), line.size());
  if (written != static_cast<ssize_t>(line.size())) throw std::runtime_error("failed to append vote record");
  auto& mine = votes_[{annotator, factor}];
  mine[pair_id] = chosen;
  std::size_t done = 0;
  for (const auto& s : slots) done += mine.count(s.pair_id);
  return {{"ok", true}, {"pair_id", pair_id}, {"completed", done}, {"total", slots.size()}};
}

json StudyService::report() const {
  std::vector<VoteRecord> records;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [key, pairs] : votes_)
      for (const auto& [pair, method] : pairs) {
        records.push_back({key.first, key.second, pair, method, method == method_a_ ? method_b_ : method_a_});
      }
  }
  return aggregate(records, 0).to_json();
}

StudyReport study_report_from_lines(const std::vector<std::string>& lines) {
  std::vector<VoteRecord> records;
  std::size_t skipped = 0;
  for (const auto& line : lines) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (auto r = parse_record(line)) {
      records.push_back(std::move(*r));
    } else {
      ++skipped;
    }
  }
  return aggregate(records, skipped);
}

StudyReport study_report(const fs::path& votes_file) {
  std::ifstream in(votes_file);
  if (!in) throw std::runtime_error(votes_file.string() + ": cannot open");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return study_report_from_lines(lines);
}

json StudyReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    json counts = json::object();
    for (const auto& [factor, ms] : r.counts)
      for (const auto& [m, n] : ms) counts["x" + std::to_string(factor)][m] = n;
    rows_json.push_back({{"annotator", r.annotator}, {"counts", counts}});
  }
  json overall = json::object();
  for (const auto& [factor, ms] : overall_percent)
    for (const auto& [m, p] : ms) overall["x" + std::to_string(factor)][m] = p;
  return {{"rows", rows_json}, {"overall_percent", overall}, {"records", records}, {"skipped_lines", skipped_lines}};
}

std::string StudyReport::to_table() const {
  std::vector<std::pair<int, std::string>> columns;
  for (const auto& [factor, names] : methods)
    for (const auto& m : names) columns.emplace_back(factor, m);
  std::size_t first = std::string("Overall in %").size();
  for (const auto& r : rows) first = std::max(first, r.annotator.size());
  std::vector<std::string> headers;
  for (const auto& [factor, m] : columns) headers.push_back(std::to_string(factor) + "x " + m);

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(first)) << "Annotator";
  for (const auto& h : headers) os << "  " << std::right << std::setw(static_cast<int>(std::max<std::size_t>(h.size(), 7))) << h;
  os << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(first)) << r.annotator;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const auto& [factor, m] = columns[i];
      std::size_t n = 0;
      if (const auto f = r.counts.find(factor); f != r.counts.end()) {
        if (const auto c = f->second.find(m); c != f->second.end()) n = c->second;
      }
      os << "  " << std::right << std::setw(static_cast<int>(std::max<std::size_t>(headers[i].size(), 7))) << n;
    }
    os << '\n';
  }
  if (!rows.empty()) {
    os << std::left << std::setw(static_cast<int>(first)) << "Overall in %";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const auto& [factor, m] = columns[i];
      std::ostringstream pct;
      pct << std::fixed << std::setprecision(2) << overall_percent.at(factor).at(m);
      os << "  " << std::right << std::setw(static_cast<int>(std::max<std::size_t>(headers[i].size(), 7)))
         << pct.str();
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace medsr
