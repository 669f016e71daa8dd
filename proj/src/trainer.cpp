#include "fewshot/trainer.hpp"

#include <chrono>
#include <cmath>
#include <utility>

#include "fewshot/errors.hpp"

namespace fewshot {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Full-batch Adam on objective(head, ...); query may have 0 rows for
/// supervised specs. Mutates head in place, returns the loss trajectory.
std::vector<double> fit_adam(SoftmaxHead& head, const Eigen::MatrixXd& support,
                             const std::vector<int>& labels, const Eigen::MatrixXd& query,
                             const MethodSpec& spec, const OptimizerConfig& opt) {
  Eigen::MatrixXd m_w = Eigen::MatrixXd::Zero(head.W.rows(), head.W.cols());
  Eigen::MatrixXd v_w = m_w;
  Eigen::VectorXd m_b = Eigen::VectorXd::Zero(head.b.size());
  Eigen::VectorXd v_b = m_b;

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(opt.iterations));
  for (int t = 1; t <= opt.iterations; ++t) {
    const double value = objective(head, support, labels, query, spec);
    if (!std::isfinite(value)) {
      throw TrainingError("non-finite loss at step " + std::to_string(t) +
                          " for method \"" + method_name(spec.method) + "\"");
    }
    history.push_back(value);

    const HeadGradient grad = gradient(head, support, labels, query, spec);
    m_w = opt.beta1 * m_w + (1.0 - opt.beta1) * grad.dW;
    v_w = opt.beta2 * v_w + (1.0 - opt.beta2) * grad.dW.cwiseProduct(grad.dW);
    m_b = opt.beta1 * m_b + (1.0 - opt.beta1) * grad.db;
    v_b = opt.beta2 * v_b + (1.0 - opt.beta2) * grad.db.cwiseProduct(grad.db);

    const double bias1 = 1.0 - std::pow(opt.beta1, t);
    const double bias2 = 1.0 - std::pow(opt.beta2, t);
    head.W.array() -=
        opt.learning_rate * (m_w.array() / bias1) / ((v_w.array() / bias2).sqrt() + opt.epsilon);
    head.b.array() -=
        opt.learning_rate * (m_b.array() / bias1) / ((v_b.array() / bias2).sqrt() + opt.epsilon);
  }
  return history;
}

EpisodePrediction predict(const SoftmaxHead& head, const Eigen::MatrixXd& query) {
  EpisodePrediction pred;
  pred.probabilities = forward(head, query);
  pred.predicted = argmax_rows(pred.probabilities);
  return pred;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (iterations < 1) throw ValidationError("iterations must be at least 1");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
    throw ValidationError("learning rate must be positive");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("adam epsilon must be positive");
}

SoftmaxHead init_head(const Episode& episode) {
  const int ways = episode.ways();
  const Eigen::MatrixXd& support = episode.support_vectors();
  const std::vector<int>& labels = episode.support_labels();

  SoftmaxHead head;
  head.W = Eigen::MatrixXd::Zero(ways, episode.dim());
  head.b = Eigen::VectorXd::Zero(ways);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(ways);
  for (Eigen::Index i = 0; i < support.rows(); ++i) {
    const int k = labels[static_cast<std::size_t>(i)];
    head.W.row(k) += support.row(i);
    counts[k] += 1.0;
  }
  for (int k = 0; k < ways; ++k) {
    head.W.row(k) /= counts[k];  // counts are exactly `shots` by construction
  }
  return head;
}

TrainOutcome train_head(const Episode& episode, const MethodSpec& spec,
                        const OptimizerConfig& opt) {
  spec.validate();
  opt.validate();
  if (spec.method == Method::kPrototypical || spec.method == Method::kSemiSupervised) {
    throw ValidationError("train_head handles ce, h, mi and fr only");
  }

  const auto start = Clock::now();
  TrainOutcome outcome;
  outcome.head = init_head(episode);
  outcome.loss_history = fit_adam(outcome.head, episode.support_vectors(),
                                  episode.support_labels(), episode.query_vectors(),
                                  spec, opt);
  outcome.prediction = predict(outcome.head, episode.query_vectors());
  outcome.prediction.train_seconds = seconds_since(start);
  return outcome;
}

EpisodePrediction prototypical_predict(const Episode& episode) {
  const auto start = Clock::now();
  const SoftmaxHead proto = init_head(episode);  // rows of W are the prototypes
  const Eigen::MatrixXd& query = episode.query_vectors();

  // logits = -||x - c||^2, expanded so Eigen can batch it
  Eigen::MatrixXd logits = 2.0 * query * proto.W.transpose();
  logits.colwise() -= query.rowwise().squaredNorm();
  logits.rowwise() -= proto.W.rowwise().squaredNorm().transpose();

  EpisodePrediction pred;
  pred.probabilities = softmax_rows(logits);
  pred.predicted = argmax_rows(pred.probabilities);
  pred.train_seconds = seconds_since(start);
  return pred;
}

SslOutcome ssl_train(const Episode& episode, const OptimizerConfig& opt) {
  const auto start = Clock::now();
  MethodSpec ce;
  ce.method = Method::kCrossEntropy;

  TrainOutcome stage1 = train_head(episode, ce, opt);

  const Eigen::MatrixXd& support = episode.support_vectors();
  const Eigen::MatrixXd& query = episode.query_vectors();
  Eigen::MatrixXd pooled(support.rows() + query.rows(), support.cols());
  pooled << support, query;
  std::vector<int> pooled_labels = episode.support_labels();
  pooled_labels.insert(pooled_labels.end(), stage1.prediction.predicted.begin(),
                       stage1.prediction.predicted.end());

  SslOutcome outcome;
  outcome.labeler = std::move(stage1.head);
  outcome.final_head = init_head(episode);
  outcome.final_train_size = static_cast<std::size_t>(pooled.rows());
  const Eigen::MatrixXd no_query(0, support.cols());
  fit_adam(outcome.final_head, pooled, pooled_labels, no_query, ce, opt);
  outcome.prediction = predict(outcome.final_head, query);
  outcome.prediction.train_seconds = seconds_since(start);
  return outcome;
}

EpisodePrediction run_method(const Episode& episode, const MethodSpec& spec,
                             const OptimizerConfig& opt) {
  spec.validate();
  opt.validate();
  switch (spec.method) {
    case Method::kPrototypical:
      return prototypical_predict(episode);
    case Method::kSemiSupervised:
      return ssl_train(episode, opt).prediction;
    default:
      return train_head(episode, spec, opt).prediction;
  }
}

std::vector<int> argmax_rows(const ProbabilityMatrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      if (probs(i, k) > probs(i, best)) best = static_cast<int>(k);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace fewshot
