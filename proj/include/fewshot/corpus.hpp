#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fewshot/errors.hpp"

namespace fewshot {

/// One labeled example: an opaque identifier, a class name, and a dense
/// embedding vector. `text` is carried through serialization when present but
/// never used by training.
struct EmbeddingRecord {
  std::string id;
  std::string label;
  Eigen::VectorXd vector;
  std::optional<std::string> text;
};

/// Immutable labeled embedding collection. The label space is sorted
/// lexicographically so everything sampled downstream is reproducible, and the
/// per-class index partitions the records exactly.
class LabeledCorpus {
 public:
  /// Validates dimensions, finiteness and id uniqueness; builds the index.
  explicit LabeledCorpus(std::vector<EmbeddingRecord> records);

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  const std::vector<std::string>& label_space() const { return label_space_; }

  /// Record positions of one class, in file order.
  const std::vector<std::size_t>& positions(const std::string& label) const;

  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  std::vector<EmbeddingRecord> records_;
  std::vector<std::string> label_space_;
  std::map<std::string, std::vector<std::size_t>> index_;
  std::size_t dim_ = 0;
};

enum class CorpusFormat { kJsonl };

/// Loads a JSONL corpus: one object per line with keys "id", "label",
/// "embedding" and optionally "text". Errors name the offending 1-based line.
LabeledCorpus load_corpus(const std::string& path,
                          CorpusFormat format = CorpusFormat::kJsonl);

/// Writes the corpus back as JSONL. Floating point uses the shortest
/// round-trip representation, so save/load is bit-exact.
void save_corpus(const LabeledCorpus& corpus, const std::string& path);

/// Returns a copy of the corpus with every vector scaled to unit Euclidean
/// norm. A zero-norm vector is an error naming the record id.
LabeledCorpus l2_normalize(const LabeledCorpus& corpus);

}  // namespace fewshot
