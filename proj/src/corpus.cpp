#include "fewshot/corpus.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>
#include <utility>

#include <json.hpp>

namespace fewshot {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail_line(const std::string& path, std::size_t lineno,
                            const std::string& what) {
  throw ValidationError(path + " line " + std::to_string(lineno) + ": " + what);
}

bool blank(const std::string& line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace

LabeledCorpus::LabeledCorpus(std::vector<EmbeddingRecord> records)
    : records_(std::move(records)) {
  std::unordered_set<std::string> seen_ids;
  seen_ids.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const EmbeddingRecord& rec = records_[i];
    if (rec.vector.size() < 1) {
      throw ValidationError("record \"" + rec.id + "\": empty embedding");
    }
    if (i == 0) {
      dim_ = static_cast<std::size_t>(rec.vector.size());
    } else if (static_cast<std::size_t>(rec.vector.size()) != dim_) {
      throw ValidationError("record \"" + rec.id + "\": embedding dimension " +
                            std::to_string(rec.vector.size()) + " differs from " +
                            std::to_string(dim_));
    }
    if (!rec.vector.allFinite()) {
      throw ValidationError("record \"" + rec.id + "\": non-finite coordinate");
    }
    if (!seen_ids.insert(rec.id).second) {
      throw ValidationError("duplicate id \"" + rec.id + "\"");
    }
    index_[rec.label].push_back(i);
  }
  label_space_.reserve(index_.size());
  for (const auto& [label, positions] : index_) {
    (void)positions;
    label_space_.push_back(label);
  }
}

const std::vector<std::size_t>& LabeledCorpus::positions(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) {
    throw ValidationError("unknown label \"" + label + "\"");
  }
  return it->second;
}

LabeledCorpus load_corpus(const std::string& path, CorpusFormat format) {
  if (format != CorpusFormat::kJsonl) {
    throw ValidationError("unsupported corpus format");
  }
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open \"" + path + "\"");
  }

  std::vector<EmbeddingRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::size_t expected_dim = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(path, lineno, std::string("malformed JSON (") + e.what() + ")");
    }
    if (!j.is_object()) fail_line(path, lineno, "expected a JSON object");
    for (const char* key : {"id", "label"}) {
      if (!j.contains(key)) fail_line(path, lineno, std::string("missing key \"") + key + "\"");
      if (!j[key].is_string()) fail_line(path, lineno, std::string("key \"") + key + "\" must be a string");
    }
    if (!j.contains("embedding")) fail_line(path, lineno, "missing key \"embedding\"");
    const json& emb = j["embedding"];
    if (!emb.is_array() || emb.empty()) {
      fail_line(path, lineno, "key \"embedding\" must be a non-empty array");
    }

    EmbeddingRecord rec;
    rec.id = j["id"].get<std::string>();
    rec.label = j["label"].get<std::string>();
    rec.vector.resize(static_cast<Eigen::Index>(emb.size()));
    for (std::size_t k = 0; k < emb.size(); ++k) {
      if (!emb[k].is_number()) fail_line(path, lineno, "embedding entries must be numbers");
      rec.vector[static_cast<Eigen::Index>(k)] = emb[k].get<double>();
    }
    if (!rec.vector.allFinite()) fail_line(path, lineno, "non-finite embedding coordinate");
    if (j.contains("text")) {
      if (!j["text"].is_string()) fail_line(path, lineno, "key \"text\" must be a string");
      rec.text = j["text"].get<std::string>();
    }

    if (expected_dim == 0) {
      expected_dim = emb.size();
    } else if (emb.size() != expected_dim) {
      fail_line(path, lineno,
                "embedding dimension " + std::to_string(emb.size()) +
                    " differs from " + std::to_string(expected_dim));
    }
    if (!seen_ids.insert(rec.id).second) {
      fail_line(path, lineno, "duplicate id \"" + rec.id + "\"");
    }
    records.push_back(std::move(rec));
  }
  return LabeledCorpus(std::move(records));
}

void save_corpus(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot write \"" + path + "\"");
  }
  for (const EmbeddingRecord& rec : corpus.records()) {
    ordered_json j;
    j["id"] = rec.id;
    j["label"] = rec.label;
    std::vector<double> coords(rec.vector.data(), rec.vector.data() + rec.vector.size());
    j["embedding"] = coords;
    if (rec.text) j["text"] = *rec.text;
    out << j.dump() << '\n';
  }
  if (!out.flush()) {
    throw ValidationError("write failed for \"" + path + "\"");
  }
}

LabeledCorpus l2_normalize(const LabeledCorpus& corpus) {
  std::vector<EmbeddingRecord> records = corpus.records();
  for (EmbeddingRecord& rec : records) {
    const double norm = rec.vector.norm();
    if (norm == 0.0) {
      throw ValidationError("zero-norm vector for id \"" + rec.id + "\"");
    }
    rec.vector /= norm;
  }
  return LabeledCorpus(std::move(records));
}

}  // namespace fewshot
