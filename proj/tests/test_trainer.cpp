#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fewshot/metrics.hpp"
#include "fewshot/trainer.hpp"
#include "test_fixtures.hpp"

using fewshot::EpisodePrediction;
using fewshot::EvalAccess;
using fewshot::Method;
using fewshot::MethodSpec;
using fewshot::OptimizerConfig;
using fewshot::TrainingError;
using fewshot::ValidationError;

namespace {

MethodSpec spec_of(Method m, double lambda = 1.0, double alpha = 1.0) {
  MethodSpec s;
  s.method = m;
  s.lambda = lambda;
  s.alpha = alpha;
  return s;
}

// two Gaussian classes, d=8, means pinned exactly 10 sigma apart
fewshot::Episode separable_episode(std::uint64_t seed = 40, int shots = 5, int queries = 15) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<fewshot::EmbeddingRecord> records;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < shots + queries + 5; ++i) {
      fewshot::EmbeddingRecord rec;
      rec.id = std::to_string(c) + "-" + std::to_string(i);
      rec.label = "class" + std::to_string(c);
      rec.vector = Eigen::VectorXd(8);
      for (int j = 0; j < 8; ++j) rec.vector[j] = noise(gen);
      rec.vector[0] += c == 0 ? -5.0 : 5.0;
      records.push_back(std::move(rec));
    }
  }
  const fewshot::LabeledCorpus corpus{std::move(records)};
  fewshot::EpisodeSpec spec;
  spec.ways = 2;
  spec.shots = shots;
  spec.queries_per_class = queries;
  spec.seed = seed;
  return fewshot::sample_episode(corpus, spec);
}

double query_accuracy(const fewshot::Episode& ep, const EpisodePrediction& pred) {
  return fewshot::accuracy(EvalAccess::query_labels(ep), pred.predicted);
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("optimizer config validation") {
  OptimizerConfig opt;
  CHECK_NOTHROW(opt.validate());
  opt.iterations = 0;
  CHECK_THROWS_AS(opt.validate(), ValidationError);
  opt.iterations = 10;
  opt.learning_rate = 0.0;
  CHECK_THROWS_AS(opt.validate(), ValidationError);
}

TEST_CASE("init_head builds class prototypes with zero bias") {
  SUBCASE("one shot per class: rows equal the shots") {
    std::mt19937_64 gen(1);
    const auto ep = testsupport::random_episode(gen, 3, 1, 2, 4);
    const auto head = fewshot::init_head(ep);
    REQUIRE(head.ways() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(head.W.row(k) == ep.support_vectors().row(k));
    }
    CHECK(head.b == Eigen::VectorXd::Zero(3));
  }

  SUBCASE("identical shots in a class: the prototype equals them") {
    Eigen::MatrixXd support(4, 3);
    support << 1.0, 2.0, 3.0,
               1.0, 2.0, 3.0,
               -1.0, 0.0, 1.0,
               3.0, 0.0, -1.0;
    Eigen::MatrixXd query = Eigen::MatrixXd::Zero(2, 3);
    const auto ep = testsupport::make_episode(support, {0, 0, 1, 1}, query, {0, 1}, 2, 2, 1);
    const auto head = fewshot::init_head(ep);
    CHECK(head.W(0, 0) == 1.0);
    CHECK(head.W(0, 1) == 2.0);
    CHECK(head.W(0, 2) == 3.0);
    CHECK(head.W(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("prototype init already beats chance on the separable fixture") {
    const auto ep = separable_episode();
    const auto head = fewshot::init_head(ep);
    const auto probs = fewshot::forward(head, ep.query_vectors());
    EpisodePrediction pred;
    pred.predicted = fewshot::argmax_rows(probs);
    pred.probabilities = probs;
    CHECK(query_accuracy(ep, pred) > 0.5);
  }
}

TEST_CASE("separable fixture is solved exactly by every method") {
  const auto ep = separable_episode();
  const OptimizerConfig opt;
  for (Method m : {Method::kCrossEntropy, Method::kFisherRao, Method::kPrototypical,
                   Method::kSemiSupervised, Method::kEntropyMin, Method::kMutualInfo}) {
    const std::string name = fewshot::method_name(m);
    CAPTURE(name);
    const auto pred = fewshot::run_method(ep, spec_of(m), opt);
    CHECK(query_accuracy(ep, pred) == 1.0);
  }
}

TEST_CASE("CE equals H and I at lambda zero, bit-exact") {
  const auto ep = separable_episode(51);
  const OptimizerConfig opt;
  const auto ce = fewshot::train_head(ep, spec_of(Method::kCrossEntropy), opt);
  const auto h0 = fewshot::train_head(ep, spec_of(Method::kEntropyMin, 0.0), opt);
  const auto i0 = fewshot::train_head(ep, spec_of(Method::kMutualInfo, 0.0), opt);
  CHECK(ce.head.W == h0.head.W);
  CHECK(ce.head.b == h0.head.b);
  CHECK(ce.head.W == i0.head.W);
  CHECK(ce.head.b == i0.head.b);
  CHECK(ce.prediction.predicted == h0.prediction.predicted);
  CHECK(ce.prediction.probabilities == i0.prediction.probabilities);
}

TEST_CASE("CE loss is non-increasing over the last 50 iterations") {
  const auto ep = separable_episode(52);
  const OptimizerConfig opt;
  const auto out = fewshot::train_head(ep, spec_of(Method::kCrossEntropy), opt);
  REQUIRE(out.loss_history.size() == 150);
  for (std::size_t i = 100; i + 1 < out.loss_history.size(); ++i) {
    CHECK(out.loss_history[i + 1] <= out.loss_history[i] + 1e-6);
  }
  CHECK(out.loss_history.back() <= out.loss_history.front() + 1e-6);
}

TEST_CASE("transductive methods never touch query labels") {
  // same support/query vectors, scrambled query labels: identical training outcome
  std::mt19937_64 gen(53);
  const auto ep = testsupport::random_episode(gen, 3, 4, 6, 5);
  auto scrambled_labels = std::vector<int>(18, 0);
  for (std::size_t i = 0; i < scrambled_labels.size(); ++i) {
    scrambled_labels[i] = static_cast<int>(i % 3);
  }
  std::reverse(scrambled_labels.begin(), scrambled_labels.end());
  const auto scrambled = testsupport::make_episode(
      ep.support_vectors(), ep.support_labels(), ep.query_vectors(), scrambled_labels, 3, 4, 6);

  const OptimizerConfig opt;
  for (Method m : {Method::kEntropyMin, Method::kMutualInfo, Method::kFisherRao}) {
    const auto a = fewshot::train_head(ep, spec_of(m), opt);
    const auto b = fewshot::train_head(scrambled, spec_of(m), opt);
    CHECK(a.head.W == b.head.W);
    CHECK(a.prediction.predicted == b.prediction.predicted);
  }
}

TEST_CASE("prototypical prediction") {
  SUBCASE("query at a prototype lands on that class") {
    Eigen::MatrixXd support(4, 2);
    support << 0.0, 0.0,
               0.0, 2.0,
               10.0, 0.0,
               10.0, 2.0;
    Eigen::MatrixXd query(2, 2);
    query << 10.0, 1.0,   // exactly prototype 1
             0.0, 1.0;    // exactly prototype 0
    const auto ep = testsupport::make_episode(support, {0, 0, 1, 1}, query, {1, 0}, 2, 2, 1);
    const auto pred = fewshot::prototypical_predict(ep);
    CHECK(pred.predicted == std::vector<int>{1, 0});
    CHECK(pred.probabilities.rows() == 2);
    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(std::abs(pred.probabilities.row(i).sum() - 1.0) < 1e-12);
    }
  }

  SUBCASE("one shot per class reduces to nearest neighbor") {
    std::mt19937_64 gen(54);
    for (int round = 0; round < 20; ++round) {
      const auto ep = testsupport::random_episode(gen, 5, 1, 4, 6);
      const auto pred = fewshot::prototypical_predict(ep);
      for (Eigen::Index q = 0; q < ep.query_vectors().rows(); ++q) {
        int best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index s = 0; s < ep.support_vectors().rows(); ++s) {
          const double d = (ep.query_vectors().row(q) - ep.support_vectors().row(s)).squaredNorm();
          if (d < best_dist) {
            best_dist = d;
            best = ep.support_labels()[static_cast<std::size_t>(s)];
          }
        }
        CHECK(pred.predicted[static_cast<std::size_t>(q)] == best);
      }
    }
  }
}

TEST_CASE("pseudo-label retraining") {
  const auto ep = separable_episode(55);
  const OptimizerConfig opt;
  const auto ssl = fewshot::ssl_train(ep, opt);

  // stage one is exactly the CE baseline
  const auto ce = fewshot::train_head(ep, spec_of(Method::kCrossEntropy), opt);
  CHECK(ssl.labeler.W == ce.head.W);
  CHECK(ssl.labeler.b == ce.head.b);
  const auto stage1 = fewshot::argmax_rows(fewshot::forward(ssl.labeler, ep.query_vectors()));
  CHECK(stage1 == ce.prediction.predicted);

  // stage two trains on support plus every query
  CHECK(ssl.final_train_size ==
        ep.support_labels().size() + static_cast<std::size_t>(ep.query_vectors().rows()));

  // correct pseudo-labels on the separable fixture keep accuracy perfect
  CHECK(query_accuracy(ep, ssl.prediction) == 1.0);
  CHECK(ssl.prediction.predicted ==
        fewshot::run_method(ep, spec_of(Method::kSemiSupervised), opt).predicted);
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 gen(56);
  const auto ep = testsupport::random_episode(gen, 4, 3, 5, 6);
  const OptimizerConfig opt;
  for (Method m : fewshot::all_methods()) {
    const auto a = fewshot::run_method(ep, spec_of(m, 1.0, 0.8), opt);
    const auto b = fewshot::run_method(ep, spec_of(m, 1.0, 0.8), opt);
    CHECK(a.predicted == b.predicted);
    CHECK(a.probabilities == b.probabilities);
  }
}

TEST_CASE("every method returns one prediction per query with probability rows") {
  std::mt19937_64 gen(57);
  const auto ep = testsupport::random_episode(gen, 3, 2, 4, 5);
  const OptimizerConfig opt;
  for (Method m : fewshot::all_methods()) {
    const auto pred = fewshot::run_method(ep, spec_of(m), opt);
    CHECK(pred.predicted.size() == 12);
    CHECK(pred.probabilities.rows() == 12);
    CHECK(pred.probabilities.cols() == 3);
    CHECK(pred.train_seconds >= 0.0);
    for (Eigen::Index i = 0; i < pred.probabilities.rows(); ++i) {
      CHECK(std::abs(pred.probabilities.row(i).sum() - 1.0) < 1e-12);
    }
    for (int p : pred.predicted) {
      CHECK(p >= 0);
      CHECK(p < 3);
    }
  }
}

TEST_CASE("train_head rejects methods that do not optimize the objective") {
  std::mt19937_64 gen(58);
  const auto ep = testsupport::random_episode(gen, 3, 2, 2, 4);
  const OptimizerConfig opt;
  CHECK_THROWS_AS(fewshot::train_head(ep, spec_of(Method::kPrototypical), opt), ValidationError);
  CHECK_THROWS_AS(fewshot::train_head(ep, spec_of(Method::kSemiSupervised), opt),
                  ValidationError);
}

TEST_CASE("non-finite loss aborts with step and method in the message") {
  // coordinates near the double limit overflow the first matmul
  Eigen::MatrixXd support(4, 2);
  support << 1e308, 0.0,
             1e308, 1e308,
             -1e308, 0.0,
             -1e308, -1e308;
  Eigen::MatrixXd query(2, 2);
  query << 1e308, 0.0,
           -1e308, 0.0;
  const auto ep = testsupport::make_episode(support, {0, 0, 1, 1}, query, {0, 1}, 2, 2, 1);
  const OptimizerConfig opt;
  CHECK_THROWS_WITH_AS(fewshot::train_head(ep, spec_of(Method::kCrossEntropy), opt),
                       doctest::Contains("step 1"), TrainingError);
  CHECK_THROWS_WITH_AS(fewshot::train_head(ep, spec_of(Method::kCrossEntropy), opt),
                       doctest::Contains("ce"), TrainingError);
}

TEST_CASE("argmax breaks ties toward the lowest class index") {
  Eigen::MatrixXd probs(3, 3);
  probs << 0.4, 0.4, 0.2,
           0.2, 0.4, 0.4,
           1.0 / 3, 1.0 / 3, 1.0 / 3;
  CHECK(fewshot::argmax_rows(probs) == std::vector<int>{0, 1, 0});
}

TEST_CASE("prototypical prediction costs under 1% of CE training time") {
  // larger episode so the CE wall clock is comfortably measurable
  const auto corpus = testsupport::gaussian_corpus(12, 30, 64, 4.0, 59);
  fewshot::EpisodeSpec spec;
  spec.ways = 10;
  spec.shots = 10;
  spec.queries_per_class = 15;
  spec.seed = 59;
  const auto ep = fewshot::sample_episode(corpus, spec);
  const OptimizerConfig opt;

  const auto ce = fewshot::train_head(ep, spec_of(Method::kCrossEntropy), opt);
  double pt_seconds = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 5; ++i) {
    pt_seconds = std::min(pt_seconds, fewshot::prototypical_predict(ep).train_seconds);
  }
  CHECK(ce.prediction.train_seconds > 0.0);
  CHECK(pt_seconds < 0.01 * ce.prediction.train_seconds);
}

}  // TEST_SUITE
