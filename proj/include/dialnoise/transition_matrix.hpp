#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dialnoise {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  /// Adds or replaces a token vector. Throws on a dimension mismatch or NaN.
  void add(std::string token, Eigen::VectorXf vec);
  const Eigen::VectorXf* find(std::string_view token) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  /// GloVe text format: one "token v1 v2 ... vd" line per token.
  static EmbeddingTable read_glove(std::istream& in);
  static EmbeddingTable load_glove(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::map<std::string, Eigen::VectorXf, std::less<>> vectors_;
};

struct TransitionMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd rows;

  /// Index of `label`, or -1.
  long index(std::string_view label) const;
  double probability(std::string_view from, std::string_view to) const;
};

inline constexpr double kTransitionEpsilon = 1e-6;

/// Bag-of-words embedding of a label: mean of the vectors of its lower-cased
/// tokens (split on whitespace, '_' and '-') found in the table.
Eigen::VectorXd embed_label(std::string_view label, const EmbeddingTable& table);

/// P(i -> j) proportional to max(cos(e_i, e_j), 0) + epsilon for i != j,
/// zero diagonal, rows normalized.
TransitionMatrix build_transition_matrix(const std::vector<std::string>& labels,
                                         const EmbeddingTable& embeddings,
                                         double epsilon = kTransitionEpsilon);

TransitionMatrix uniform_transition_matrix(const std::vector<std::string>& labels);

}  // namespace dialnoise
