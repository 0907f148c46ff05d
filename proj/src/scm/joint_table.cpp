#include "zin/scm/joint_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "zin/common/errors.hpp"

namespace zin::scm {

JointTable::JointTable(std::vector<std::string> names, std::vector<int> cards)
    : names_(std::move(names)), cards_(std::move(cards)) {
  init_strides();
}

JointTable::JointTable(std::vector<std::string> names, std::vector<int> cards, std::vector<double> probs)
    : names_(std::move(names)), cards_(std::move(cards)) {
  init_strides();
  if (probs.size() != probs_.size()) {
    throw DimensionError("joint table expects " + std::to_string(probs_.size()) + " cells, got " +
                         std::to_string(probs.size()));
  }
  probs_ = std::move(probs);
}

void JointTable::init_strides() {
  if (names_.size() != cards_.size()) throw DimensionError("axis names and cardinalities differ in length");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (cards_[i] < 1) throw DomainError("axis '" + names_[i] + "' has non-positive cardinality");
    for (std::size_t j = 0; j < i; ++j)
      if (names_[i] == names_[j]) throw SchemaError("duplicate axis '" + names_[i] + "'");
  }
  strides_.assign(cards_.size(), 1);
  std::size_t total = 1;
  for (std::size_t i = cards_.size(); i-- > 0;) {
    strides_[i] = total;
    total *= static_cast<std::size_t>(cards_[i]);
  }
  probs_.assign(total, 0.0);
}

std::size_t JointTable::axis(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw SchemaError("joint table has no axis '" + name + "'");
}

bool JointTable::has_axis(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t JointTable::index(std::span<const int> assignment) const {
  if (assignment.size() != cards_.size()) throw DimensionError("assignment length does not match axis count");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    if (assignment[i] < 0 || assignment[i] >= cards_[i]) {
      throw DomainError("value " + std::to_string(assignment[i]) + " out of range for axis '" + names_[i] + "'");
    }
    idx += static_cast<std::size_t>(assignment[i]) * strides_[i];
  }
  return idx;
}

std::vector<int> JointTable::assignment(std::size_t index) const {
  std::vector<int> a(cards_.size());
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    a[i] = static_cast<int>(index / strides_[i]);
    index %= strides_[i];
  }
  return a;
}

double JointTable::total() const {
  double s = 0.0;
  for (double p : probs_) s += p;
  return s;
}

void JointTable::validate(double tol) const {
  for (double p : probs_)
    if (!(p >= 0.0)) throw DomainError("joint table has a negative or NaN entry");
  const double t = total();
  if (std::abs(t - 1.0) > tol) throw DomainError("joint table mass is " + std::to_string(t) + ", expected 1");
}

JointTable JointTable::marginal(const std::vector<std::string>& keep) const {
  std::vector<std::size_t> axes;
  std::vector<int> cards;
  for (const auto& n : keep) {
    axes.push_back(axis(n));
    cards.push_back(cards_[axes.back()]);
  }
  JointTable out(keep, cards);
  std::vector<int> a(cards_.size(), 0);
  std::vector<int> sub(keep.size());
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    for (std::size_t k = 0; k < axes.size(); ++k) sub[k] = a[axes[k]];
    out.probs_[out.index(sub)] += probs_[i];
    for (std::size_t d = cards_.size(); d-- > 0;) {
      if (++a[d] < cards_[d]) break;
      a[d] = 0;
    }
  }
  return out;
}

void JointTable::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& n : names_) out << n << ",";
  out << "p\n";
  std::string cards_row = "#cards";
  for (int c : cards_) cards_row += "," + std::to_string(c);
  out << cards_row << "\n";
  char buf[32];
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    for (int v : assignment(i)) out << v << ",";
    std::snprintf(buf, sizeof buf, "%.17g", probs_[i]);
    out << buf << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

JointTable JointTable::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  auto split = [](const std::string& line) {
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) parts.push_back(cell);
    return parts;
  };
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty joint table file");
  auto header = split(line);
  if (header.empty() || header.back() != "p") throw ParseError(path + ": last header column must be 'p'");
  header.pop_back();
  if (!std::getline(in, line)) throw ParseError(path + ": missing #cards row");
  auto card_cells = split(line);
  if (card_cells.empty() || card_cells[0] != "#cards" || card_cells.size() != header.size() + 1) {
    throw ParseError(path + ":2: malformed #cards row");
  }
  std::vector<int> cards;
  for (std::size_t i = 1; i < card_cells.size(); ++i) cards.push_back(std::stoi(card_cells[i]));
  JointTable t(header, cards);
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size() + 1) throw ParseError(path + ":" + std::to_string(line_no) + ": wrong field count");
    std::vector<int> a;
    try {
      for (std::size_t i = 0; i < header.size(); ++i) a.push_back(std::stoi(cells[i]));
      t.at(a) = std::stod(cells.back());
    } catch (const std::logic_error&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": cannot parse cell");
    }
  }
  return t;
}

double max_abs_diff(const JointTable& a, const JointTable& b) {
  if (a.names() != b.names() || a.cards() != b.cards()) throw DimensionError("joint tables have different layouts");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace zin::scm
