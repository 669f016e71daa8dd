#include "fewshot/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fewshot/errors.hpp"

namespace fewshot {

namespace {

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

bool is_transductive(Method m) {
  return m == Method::kEntropyMin || m == Method::kMutualInfo || m == Method::kFisherRao;
}

void check_labels(Eigen::Index rows, Eigen::Index ways, const std::vector<int>& labels) {
  if (labels.size() != static_cast<std::size_t>(rows)) {
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= ways) {
      throw ValidationError("label " + std::to_string(y) + " outside 0.." +
                            std::to_string(ways - 1));
    }
  }
}

void check_trainable(Method m) {
  if (m == Method::kPrototypical || m == Method::kSemiSupervised) {
    throw ValidationError(std::string("objective is undefined for method \"") +
                          method_name(m) + "\"");
  }
}

/// dR/dP at the clamped probabilities (straight-through at the clamp).
Eigen::MatrixXd regularizer_grad(const ProbabilityMatrix& probs, const MethodSpec& spec) {
  const double n = static_cast<double>(probs.rows());
  switch (spec.method) {
    case Method::kEntropyMin:
      return ((probs.array().log() + 1.0) / n).matrix();
    case Method::kMutualInfo: {
      const Eigen::VectorXd marginal = probs.colwise().mean().transpose();
      Eigen::MatrixXd grad = (spec.alpha * (probs.array().log() + 1.0) / n).matrix();
      grad.rowwise() -= ((marginal.array().log() + 1.0) / n).matrix().transpose();
      return grad;
    }
    case Method::kFisherRao: {
      // R = (1/n) sum_i -log(s_i . t) with s = sqrt(P), t = column sums of s.
      const Eigen::MatrixXd s = probs.cwiseSqrt();
      const Eigen::VectorXd t = s.colwise().sum().transpose();
      const Eigen::VectorXd g = s * t;
      const Eigen::VectorXd u = g.cwiseInverse();
      const Eigen::VectorXd c = s.transpose() * u;
      Eigen::MatrixXd ds = u * t.transpose();  // t_b / g_a
      ds.rowwise() += c.transpose();
      ds *= -1.0 / n;
      return (ds.array() / (2.0 * s.array())).matrix();
    }
    default:
      throw ValidationError("no regularizer for this method");
  }
}

double regularizer_value(const ProbabilityMatrix& probs, const MethodSpec& spec) {
  switch (spec.method) {
    case Method::kEntropyMin:
      return entropy_regularizer(probs);
    case Method::kMutualInfo:
      return mi_regularizer(probs, spec.alpha);
    case Method::kFisherRao:
      return fisher_rao_regularizer(probs);
    default:
      throw ValidationError("no regularizer for this method");
  }
}

}  // namespace

const char* method_name(Method method) {
  switch (method) {
    case Method::kCrossEntropy: return "ce";
    case Method::kPrototypical: return "pt";
    case Method::kSemiSupervised: return "ssl";
    case Method::kEntropyMin: return "h";
    case Method::kMutualInfo: return "mi";
    case Method::kFisherRao: return "fr";
  }
  throw ValidationError("unknown method enum value");
}

Method method_from_name(std::string_view name) {
  for (Method m : all_methods()) {
    if (name == method_name(m)) return m;
  }
  throw ValidationError("unknown method \"" + std::string(name) +
                        "\" (expected ce, pt, ssl, h, mi or fr)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {
      Method::kCrossEntropy, Method::kPrototypical, Method::kSemiSupervised,
      Method::kEntropyMin,   Method::kMutualInfo,   Method::kFisherRao,
  };
  return methods;
}

void MethodSpec::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ValidationError("lambda must be finite and non-negative");
  }
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0) {
    throw ValidationError("alpha must lie in [0, 1]");
  }
}

ProbabilityMatrix softmax_rows(const Eigen::MatrixXd& logits) {
  if (logits.rows() < 1 || logits.cols() < 1) {
    throw ValidationError("softmax input must be non-empty");
  }
  Eigen::MatrixXd p =
      (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  p = p.cwiseMax(kProbFloor);
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

ProbabilityMatrix forward(const SoftmaxHead& head, const Eigen::MatrixXd& vectors) {
  if (vectors.cols() != head.W.cols() || head.b.size() != head.W.rows()) {
    throw ValidationError("head shapes do not match input dimension");
  }
  Eigen::MatrixXd logits = vectors * head.W.transpose();
  logits.rowwise() += head.b.transpose();
  return softmax_rows(logits);
}

double cross_entropy(const ProbabilityMatrix& probs, const std::vector<int>& labels) {
  check_labels(probs.rows(), probs.cols(), labels);
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    total -= std::log(probs(i, labels[static_cast<std::size_t>(i)]));
  }
  return total / static_cast<double>(probs.rows());
}

double entropy_regularizer(const ProbabilityMatrix& probs) {
  if (probs.rows() < 1) throw ValidationError("regularizer needs at least one row");
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      total += xlogx(probs(i, k));
    }
  }
  return total / static_cast<double>(probs.rows());
}

double mi_regularizer(const ProbabilityMatrix& probs, double alpha) {
  if (probs.rows() < 1) throw ValidationError("regularizer needs at least one row");
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0) {
    throw ValidationError("alpha must lie in [0, 1]");
  }
  const Eigen::VectorXd marginal = probs.colwise().mean().transpose();
  double marginal_entropy = 0.0;
  for (Eigen::Index k = 0; k < marginal.size(); ++k) {
    marginal_entropy -= xlogx(marginal[k]);
  }
  return marginal_entropy + alpha * entropy_regularizer(probs);
}

double fisher_rao_distance(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
  if (q.size() != p.size()) {
    throw ValidationError("distance needs vectors of equal dimension");
  }
  const double bc = (q.array() * p.array()).sqrt().sum();
  return 2.0 * std::acos(std::clamp(bc, 0.0, 1.0));
}

double fisher_rao_regularizer(const ProbabilityMatrix& probs) {
  if (probs.rows() < 1) throw ValidationError("regularizer needs at least one row");
  const Eigen::MatrixXd s = probs.cwiseSqrt();
  const Eigen::VectorXd t = s.colwise().sum().transpose();
  const Eigen::VectorXd g = s * t;  // g_i = sum_j BC(p_i, p_j), always >= 1
  double total = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    total -= std::log(g[i]);
  }
  return total / static_cast<double>(probs.rows());
}

double objective(const SoftmaxHead& head, const Eigen::MatrixXd& support_vectors,
                 const std::vector<int>& support_labels,
                 const Eigen::MatrixXd& query_vectors, const MethodSpec& spec) {
  spec.validate();
  check_trainable(spec.method);
  double value = cross_entropy(forward(head, support_vectors), support_labels);
  if (is_transductive(spec.method) && spec.lambda != 0.0) {
    value -= spec.lambda * regularizer_value(forward(head, query_vectors), spec);
  }
  return value;
}

double objective(const SoftmaxHead& head, const Episode& episode, const MethodSpec& spec) {
  return objective(head, episode.support_vectors(), episode.support_labels(),
                   episode.query_vectors(), spec);
}

HeadGradient gradient(const SoftmaxHead& head, const Eigen::MatrixXd& support_vectors,
                      const std::vector<int>& support_labels,
                      const Eigen::MatrixXd& query_vectors, const MethodSpec& spec) {
  spec.validate();
  check_trainable(spec.method);

  const ProbabilityMatrix support_probs = forward(head, support_vectors);
  check_labels(support_probs.rows(), support_probs.cols(), support_labels);
  Eigen::MatrixXd dlogits = support_probs;
  for (Eigen::Index i = 0; i < dlogits.rows(); ++i) {
    dlogits(i, support_labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  dlogits /= static_cast<double>(dlogits.rows());

  HeadGradient grad;
  grad.dW = dlogits.transpose() * support_vectors;
  grad.db = dlogits.colwise().sum().transpose();

  if (is_transductive(spec.method) && spec.lambda != 0.0) {
    const ProbabilityMatrix query_probs = forward(head, query_vectors);
    const Eigen::MatrixXd g = regularizer_grad(query_probs, spec);
    // chain rule through the row softmax
    const Eigen::ArrayXd row_dot = (g.array() * query_probs.array()).rowwise().sum();
    const Eigen::MatrixXd dq =
        (query_probs.array() * (g.array().colwise() - row_dot)).matrix();
    grad.dW -= spec.lambda * (dq.transpose() * query_vectors);
    grad.db -= spec.lambda * dq.colwise().sum().transpose();
  }
  return grad;
}

HeadGradient gradient(const SoftmaxHead& head, const Episode& episode, const MethodSpec& spec) {
  return gradient(head, episode.support_vectors(), episode.support_labels(),
                  episode.query_vectors(), spec);
}

}  // namespace fewshot
