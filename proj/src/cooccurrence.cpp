#include "tempora/cooccurrence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tempora/errors.hpp"

namespace tempora {

using nlohmann::json;

CooccurrenceTable::CooccurrenceTable(std::size_t window) : window_(window) {
  if (window == 0) throw InputError("co-occurrence window must be at least 1");
}

std::uint64_t CooccurrenceTable::count(const std::string& term) const {
  auto it = counts_.find(term);
  return it == counts_.end() ? 0 : it->second;
}

std::uint64_t CooccurrenceTable::joint(const std::string& x, const std::string& y) const {
  if (x == y) return count(x);
  auto it = joint_.find(x < y ? std::pair{x, y} : std::pair{y, x});
  return it == joint_.end() ? 0 : it->second;
}

void CooccurrenceTable::add_window(std::span<const std::string> terms) {
  ++total_windows_;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    ++counts_[terms[i]];
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      const auto& a = terms[i];
      const auto& b = terms[j];
      ++joint_[a < b ? std::pair{a, b} : std::pair{b, a}];
    }
  }
}

json CooccurrenceTable::to_json() const {
  json joint = json::array();
  for (const auto& [key, n] : joint_) joint.push_back(json::array({key.first, key.second, n}));
  return {{"format_version", kFormatVersion},
          {"window", window_},
          {"total_windows", total_windows_},
          {"counts", counts_},
          {"joint", std::move(joint)}};
}

CooccurrenceTable CooccurrenceTable::from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw InputError("co-occurrence table: unsupported format_version " + std::to_string(version));
    }
    CooccurrenceTable table(j.at("window").get<std::size_t>());
    table.total_windows_ = j.at("total_windows").get<std::uint64_t>();
    table.counts_ = j.at("counts").get<std::map<std::string, std::uint64_t>>();
    for (const auto& row : j.at("joint")) {
      auto a = row.at(0).get<std::string>();
      auto b = row.at(1).get<std::string>();
      if (b < a) std::swap(a, b);
      table.joint_[{a, b}] = row.at(2).get<std::uint64_t>();
    }
    return table;
  } catch (const json::exception& e) {
    throw InputError(std::string("co-occurrence table: ") + e.what());
  }
}

void CooccurrenceTable::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw InputError("cannot write " + file.string());
  out << to_json().dump() << '\n';
}

CooccurrenceTable CooccurrenceTable::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open " + file.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InputError(file.string() + ": " + e.what());
  }
}

CooccurrenceTable build_cooccurrence(std::istream& text, std::size_t window, const TermSet* keep) {
  CooccurrenceTable table(window);
  std::string line;
  std::vector<std::string> tokens;
  std::vector<std::string> distinct;
  while (std::getline(text, line)) {
    tokens.clear();
    std::istringstream words(line);
    for (std::string w; words >> w;) tokens.push_back(std::move(w));
    if (tokens.empty()) continue;
    const std::size_t windows = tokens.size() <= window ? 1 : tokens.size() - window + 1;
    for (std::size_t start = 0; start < windows; ++start) {
      const std::size_t stop = std::min(tokens.size(), start + window);
      distinct.assign(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                      tokens.begin() + static_cast<std::ptrdiff_t>(stop));
      if (keep) std::erase_if(distinct, [&](const std::string& w) { return !keep->contains(w); });
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      table.add_window(distinct);
    }
  }
  return table;
}

CooccurrenceTable build_cooccurrence(const std::filesystem::path& text, std::size_t window, const TermSet* keep) {
  std::ifstream in(text);
  if (!in) throw InputError("cannot open reference corpus " + text.string());
  return build_cooccurrence(in, window, keep);
}

double npmi(const std::string& x, const std::string& y, const CooccurrenceTable& table) {
  const std::uint64_t nxy = table.joint(x, y);
  if (nxy == 0) return -1.0;
  const double n = static_cast<double>(table.total_windows());
  const double pxy = static_cast<double>(nxy) / n;
  if (nxy == table.total_windows()) return 1.0;
  const double px = static_cast<double>(table.count(x)) / n;
  const double py = static_cast<double>(table.count(y)) / n;
  return std::log(pxy / (px * py)) / -std::log(pxy);
}

double coherence(std::span<const std::string> topic, const CooccurrenceTable& table,
                 std::vector<std::string>* warnings) {
  const std::size_t n = topic.size();
  if (n < 2) throw InputError("coherence needs at least two topic words");
  std::vector<Eigen::VectorXd> vectors(n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    if (!table.contains(topic[i])) {
      const std::string msg = "topic word '" + topic[i] + "' is absent from the reference corpus";
      if (warnings) {
        warnings->push_back(msg);
      } else {
        spdlog::warn(msg);
      }
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) vectors[i][static_cast<Eigen::Index>(j)] = npmi(topic[i], topic[j], table);
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pairs) {
      const double norm = vectors[i].norm() * vectors[j].norm();
      if (norm > 0.0) sum += vectors[i].dot(vectors[j]) / norm;
    }
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace tempora
