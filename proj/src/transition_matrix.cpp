#include "dialnoise/transition_matrix.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dialnoise/error.hpp"

namespace dialnoise {

void EmbeddingTable::add(std::string token, Eigen::VectorXf vec) {
  if (vectors_.empty() && dim_ == 0) dim_ = static_cast<std::size_t>(vec.size());
  if (static_cast<std::size_t>(vec.size()) != dim_)
    throw SchemaError("embedding for '" + token + "' has dimension " + std::to_string(vec.size()) +
                      ", expected " + std::to_string(dim_));
  if (vec.hasNaN()) throw SchemaError("embedding for '" + token + "' contains NaN");
  vectors_.insert_or_assign(std::move(token), std::move(vec));
}

const Eigen::VectorXf* EmbeddingTable::find(std::string_view token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable EmbeddingTable::read_glove(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<float> values;
    std::string field;
    while (ls >> field) {
      try {
        values.push_back(std::stof(field));
      } catch (const std::exception&) {
        throw ParseError("embeddings line " + std::to_string(lineno) + ": bad number '" + field + "'");
      }
    }
    if (values.empty()) throw ParseError("embeddings line " + std::to_string(lineno) + ": no vector");
    try {
      table.add(token, Eigen::Map<Eigen::VectorXf>(values.data(), static_cast<long>(values.size())));
    } catch (const SchemaError& e) {
      throw SchemaError("embeddings line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

EmbeddingTable EmbeddingTable::load_glove(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file " + path.string());
  return read_glove(in);
}

long TransitionMatrix::index(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<long>(i);
  return -1;
}

double TransitionMatrix::probability(std::string_view from, std::string_view to) const {
  const long i = index(from);
  const long j = index(to);
  if (i < 0 || j < 0) throw SchemaError("label not in transition matrix");
  return rows(i, j);
}

Eigen::VectorXd embed_label(std::string_view label, const EmbeddingTable& table) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<long>(table.dim()));
  std::size_t found = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    if (const auto* v = table.find(token)) {
      sum += v->cast<double>();
      ++found;
    }
    token.clear();
  };
  for (char c : label) {
    if (c == ' ' || c == '\t' || c == '_' || c == '-') {
      flush();
    } else {
      token += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    }
  }
  flush();
  if (found == 0) throw SchemaError("label '" + std::string(label) + "' has no in-vocabulary token");
  return sum / static_cast<double>(found);
}

TransitionMatrix build_transition_matrix(const std::vector<std::string>& labels,
                                         const EmbeddingTable& embeddings, double epsilon) {
  if (labels.size() < 2) throw SchemaError("transition matrix needs at least 2 labels");
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
    throw SchemaError("duplicate labels in transition matrix input");
  const long n = static_cast<long>(labels.size());
  std::vector<Eigen::VectorXd> unit;
  for (const auto& l : labels) {
    Eigen::VectorXd e = embed_label(l, embeddings);
    const double norm = e.norm();
    unit.push_back(norm > 0 ? Eigen::VectorXd(e / norm) : e);
  }
  TransitionMatrix m{labels, Eigen::MatrixXd::Zero(n, n)};
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j)
      if (i != j) m.rows(i, j) = std::max(unit[i].dot(unit[j]), 0.0) + epsilon;
    m.rows.row(i) /= m.rows.row(i).sum();
  }
  return m;
}

TransitionMatrix uniform_transition_matrix(const std::vector<std::string>& labels) {
  if (labels.size() < 2) throw SchemaError("transition matrix needs at least 2 labels");
  const long n = static_cast<long>(labels.size());
  TransitionMatrix m{labels, Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n - 1))};
  m.rows.diagonal().setZero();
  return m;
}

}  // namespace dialnoise
