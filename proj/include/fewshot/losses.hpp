#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/sampler.hpp"

namespace fewshot {

/// Rows are examples, columns are classes; every row sums to 1.
using ProbabilityMatrix = Eigen::MatrixXd;

/// Softmax outputs are clamped below at this before taking logs, then rows
/// are renormalized. Keeps every objective finite.
inline constexpr double kProbFloor = 1e-12;

/// Affine classification head: logits = X W^T + b.
struct SoftmaxHead {
  Eigen::MatrixXd W;  // ways x dim
  Eigen::VectorXd b;  // ways

  int ways() const { return static_cast<int>(W.rows()); }
  int dim() const { return static_cast<int>(W.cols()); }
};

enum class Method {
  kCrossEntropy,   // supervised baseline, support only
  kPrototypical,   // distance to class means, no optimization
  kSemiSupervised, // two-stage pseudo-label retraining
  kEntropyMin,     // query entropy penalty
  kMutualInfo,     // marginal entropy minus alpha * conditional entropy
  kFisherRao,      // pairwise half-angle affinity penalty
};

const char* method_name(Method method);
Method method_from_name(std::string_view name);
const std::vector<Method>& all_methods();

struct MethodSpec {
  Method method = Method::kCrossEntropy;
  double lambda = 1.0;  // regularizer weight
  double alpha = 1.0;   // conditional-entropy weight, mutual-info only

  void validate() const;
};

/// Row-wise softmax with max-shift; outputs floored at kProbFloor and
/// renormalized so rows still sum to 1.
ProbabilityMatrix softmax_rows(const Eigen::MatrixXd& logits);

ProbabilityMatrix forward(const SoftmaxHead& head, const Eigen::MatrixXd& vectors);

/// Mean negative log-probability of the true class.
double cross_entropy(const ProbabilityMatrix& probs, const std::vector<int>& labels);

/// (1/n) sum_i sum_k p_ik log p_ik. Negative of mean Shannon entropy, so
/// maximizing it sharpens predictions.
double entropy_regularizer(const ProbabilityMatrix& probs);

/// Marginal entropy of the mean prediction minus alpha times mean conditional
/// entropy. Maximized, it spreads mass across classes while sharpening rows.
double mi_regularizer(const ProbabilityMatrix& probs, double alpha);

/// Geodesic distance on the probability simplex: 2 arccos(sum_k sqrt(q_k p_k)).
double fisher_rao_distance(const Eigen::VectorXd& q, const Eigen::VectorXd& p);

/// (1/n) sum_i -log sum_j cos(d_FR(p_i, p_j)/2), the half-angle affinity form.
/// Computed via column sums of sqrt(P), O(n K) not O(n^2).
double fisher_rao_regularizer(const ProbabilityMatrix& probs);

/// Support cross-entropy minus lambda times the method's query regularizer.
/// Purely supervised methods skip the query term entirely, as does lambda == 0,
/// so those paths are bit-identical to plain cross-entropy.
double objective(const SoftmaxHead& head, const Episode& episode, const MethodSpec& spec);

/// Same objective on explicit matrices; query_vectors may be empty (0 rows)
/// for supervised specs.
double objective(const SoftmaxHead& head, const Eigen::MatrixXd& support_vectors,
                 const std::vector<int>& support_labels,
                 const Eigen::MatrixXd& query_vectors, const MethodSpec& spec);

struct HeadGradient {
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;
};

/// Analytic gradient of objective() in head parameters.
HeadGradient gradient(const SoftmaxHead& head, const Episode& episode, const MethodSpec& spec);

HeadGradient gradient(const SoftmaxHead& head, const Eigen::MatrixXd& support_vectors,
                      const std::vector<int>& support_labels,
                      const Eigen::MatrixXd& query_vectors, const MethodSpec& spec);

}  // namespace fewshot
