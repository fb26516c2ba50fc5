#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mrphe/embedding.hpp"
#include "mrphe/encoder.hpp"
#include "mrphe/errors.hpp"

namespace mrphe {

// ---------------------------------------------------------------------------
// Lexicons and prompt generation

struct ClassLexicon {
  std::string class_name;
  std::vector<std::string> synonyms;
  std::vector<std::string> clinical_statements;
};

// Sentence templates, each with exactly one "{}" placeholder.
struct TemplateSet {
  std::vector<std::string> templates;
  void validate() const;
};

struct Lexicon {
  TemplateSet templates;
  std::vector<ClassLexicon> classes;

  std::vector<std::string> class_names() const;
};

// {"templates": [...], "classes": [{"name", "synonyms", "clinical_statements"}, ...]}
Lexicon parse_lexicon(const nlohmann::json& j);
Lexicon read_lexicon(const std::filesystem::path& path);
nlohmann::json lexicon_to_json(const Lexicon& lexicon);

std::string trim(std::string_view s);
std::string fill_template(std::string_view tmpl, std::string_view filler);

// Templates x ({class_name} + synonyms), template-major, then clinical statements.
// Entries are whitespace-trimmed and exact duplicates dropped (first occurrence wins).
// Throws ConfigError when the result is empty.
std::vector<std::string> generate_prompts(const ClassLexicon& lexicon, const TemplateSet& templates);

inline constexpr std::string_view kReferenceTemplate = "a photo of a {}.";

// The reference-label prompt, e.g. "a photo of a benign."
inline std::string reference_prompt(std::string_view class_name, std::string_view tmpl = kReferenceTemplate) {
  return fill_template(tmpl, class_name);
}

// ---------------------------------------------------------------------------
// Prompt banks, scoring and selection

enum class ScoreSource { None, ValidationAccuracy, MarginFallback };

template <typename Scalar>
struct ClassPrompts {
  std::string class_name;
  std::vector<std::string> texts;
  UnitRows<Scalar> embeddings;  // one row per text
  std::vector<std::optional<double>> scores;
  ScoreSource score_source = ScoreSource::None;

  std::size_t size() const { return texts.size(); }
};

template <typename Scalar>
struct PromptBank {
  std::vector<ClassPrompts<Scalar>> classes;
  Eigen::Index dim() const { return classes.empty() ? 0 : classes.front().embeddings.dim(); }
};

template <typename Scalar>
PromptBank<Scalar> encode_bank(const Lexicon& lexicon, const Encoder& text_encoder, int expected_dim = 0) {
  lexicon.templates.validate();
  PromptBank<Scalar> bank;
  for (const auto& cls : lexicon.classes) {
    auto texts = generate_prompts(cls, lexicon.templates);
    for (const auto& t : texts)
      if (t.empty()) throw DataError("empty prompt text in class '" + cls.class_name + "'");
    const auto info = text_encoder.info();
    if (!info.supports_text()) throw ConfigError("encoder '" + info.model_name + "' has no text modality");
    const int dim = expected_dim > 0 ? expected_dim : info.dim;
    const auto raw = text_encoder.embed_texts(texts);
    RowMatrix<Scalar> m(static_cast<Eigen::Index>(texts.size()), dim);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (static_cast<int>(raw[i].size()) != dim)
        throw ConfigError("encoder returned dimension " + std::to_string(raw[i].size()) + " for '" + texts[i] +
                          "', pipeline expects " + std::to_string(dim));
      for (int d = 0; d < dim; ++d) m(static_cast<Eigen::Index>(i), d) = static_cast<Scalar>(raw[i][d]);
    }
    const std::size_t count = texts.size();
    auto rows = UnitRows<Scalar>::normalize(std::move(m), texts);
    bank.classes.push_back({cls.class_name, std::move(texts), std::move(rows),
                            std::vector<std::optional<double>>(count), ScoreSource::None});
  }
  return bank;
}

namespace detail {

// Index of the maximum entry, lowest index on exact ties.
template <typename Derived>
Eigen::Index first_argmax(const Eigen::MatrixBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Scores every prompt by validation accuracy. While prompt m of class c is scored, class c is
// represented by that prompt alone and every other class by its full bank; an image is assigned
// to the class with the highest max-over-prompts similarity to its global embedding.
//
// A class with no validation images has its prompts scored instead by
// logistic(t.l_c - max_{c'!=c} t.l_c') against the reference-label embeddings.
template <typename Scalar>
void score_prompts(PromptBank<Scalar>& bank, const UnitRows<Scalar>& val_embeddings, std::span<const int> val_labels,
                   const UnitRows<Scalar>& references) {
  const auto C = static_cast<Eigen::Index>(bank.classes.size());
  const Eigen::Index n_val = val_embeddings.rows();
  if (static_cast<Eigen::Index>(val_labels.size()) != n_val)
    throw ConfigError("validation labels and embeddings differ in length");
  if (references.rows() != C) throw ConfigError("need one reference embedding per class");
  for (const auto& cls : bank.classes)
    if (cls.embeddings.dim() != references.dim() || (n_val > 0 && cls.embeddings.dim() != val_embeddings.dim()))
      throw ConfigError("prompt embedding dimension mismatch in class '" + cls.class_name + "'");
  for (int y : val_labels)
    if (y < 0 || y >= C) throw DataError("validation label index " + std::to_string(y) + " out of range");

  std::vector<Eigen::Index> per_class(static_cast<std::size_t>(C), 0);
  for (int y : val_labels) ++per_class[static_cast<std::size_t>(y)];

  // Per-class similarities (N_val x M_c) and each class's best-prompt similarity per image.
  std::vector<Eigen::MatrixXd> sims(static_cast<std::size_t>(C));
  Eigen::MatrixXd best(n_val, C);
  for (Eigen::Index c = 0; c < C; ++c) {
    if (n_val == 0) break;
    sims[c] = (val_embeddings.matrix() * bank.classes[c].embeddings.matrix().transpose()).template cast<double>();
    best.col(c) = sims[c].rowwise().maxCoeff();
  }

  const Eigen::MatrixXd ref = references.matrix().template cast<double>();
  for (Eigen::Index c = 0; c < C; ++c) {
    auto& cls = bank.classes[c];
    const auto M = static_cast<Eigen::Index>(cls.size());
    if (per_class[c] > 0) {
      cls.score_source = ScoreSource::ValidationAccuracy;
      Eigen::VectorXd trial(C);
      for (Eigen::Index m = 0; m < M; ++m) {
        Eigen::Index correct = 0;
        for (Eigen::Index n = 0; n < n_val; ++n) {
          trial = best.row(n).transpose();
          trial[c] = sims[c](n, m);
          if (detail::first_argmax(trial) == val_labels[n]) ++correct;
        }
        cls.scores[m] = static_cast<double>(correct) / static_cast<double>(n_val);
      }
    } else {
      cls.score_source = ScoreSource::MarginFallback;
      const Eigen::MatrixXd to_refs = cls.embeddings.matrix().template cast<double>() * ref.transpose();  // M x C
      for (Eigen::Index m = 0; m < M; ++m) {
        double margin = to_refs(m, c);
        if (C > 1) {
          double other = -std::numeric_limits<double>::infinity();
          for (Eigen::Index k = 0; k < C; ++k)
            if (k != c) other = std::max(other, to_refs(m, k));
          margin -= other;
        }
        cls.scores[m] = detail::logistic(margin);
      }
    }
  }
}

template <typename Scalar>
struct SelectedClass {
  std::string class_name;
  std::vector<std::size_t> indices;  // into the bank's prompt list
  std::vector<std::string> texts;
  std::vector<std::optional<double>> scores;
  UnitRows<Scalar> embeddings;       // K_effective x D
  Vector<Scalar> weights;            // empty until text weights are assigned
};

// Per class: sort by (score desc, generation index asc), keep the first min(K, M_c).
template <typename Scalar>
std::vector<SelectedClass<Scalar>> select_top_k(const PromptBank<Scalar>& bank, int k) {
  if (k < 1) throw ConfigError("k: must be >= 1");
  std::vector<SelectedClass<Scalar>> out;
  for (const auto& cls : bank.classes) {
    std::vector<std::size_t> order(cls.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (const auto& s : cls.scores)
      if (!s) throw ContractError("select_top_k: class '" + cls.class_name + "' has unscored prompts");
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *cls.scores[a] > *cls.scores[b]; });
    order.resize(std::min<std::size_t>(static_cast<std::size_t>(k), order.size()));

    RowMatrix<Scalar> m(static_cast<Eigen::Index>(order.size()), cls.embeddings.dim());
    SelectedClass<Scalar> sel{cls.class_name, order, {}, {}, {}, {}};
    for (std::size_t j = 0; j < order.size(); ++j) {
      sel.texts.push_back(cls.texts[order[j]]);
      sel.scores.push_back(cls.scores[order[j]]);
      m.row(static_cast<Eigen::Index>(j)) = cls.embeddings.matrix().row(static_cast<Eigen::Index>(order[j]));
    }
    sel.embeddings = UnitRows<Scalar>::checked(std::move(m));
    out.push_back(std::move(sel));
  }
  return out;
}

// l_c = normalize(g(reference_prompt(class_name))).
template <typename Scalar = double>
Embedding<Scalar> reference_embedding(std::string_view class_name, const Encoder& text_encoder,
                                      std::string_view tmpl = kReferenceTemplate, int expected_dim = 0) {
  const auto text = reference_prompt(class_name, tmpl);
  const auto raw = encode_text(text_encoder, text, expected_dim);
  return Embedding<Scalar>::unit(normalized_copy(raw.values().template cast<Scalar>(), text), text);
}

// v = softmax(beta * (T l)), T the selected prompt embeddings.
template <typename Scalar>
Vector<Scalar> text_weights(const UnitRows<Scalar>& selected, const Embedding<Scalar>& reference, double beta) {
  if (selected.rows() < 1) throw ContractError("text_weights: no selected prompts");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta: must be a finite value >= 0");
  if (!reference.normalized()) throw ContractError("text_weights: reference embedding is not normalized");
  if (reference.dim() != selected.dim()) throw ConfigError("text_weights: dimension mismatch");
  const Eigen::VectorXd s = selected.matrix().template cast<double>() * reference.values().template cast<double>();
  return softmax(beta * s).template cast<Scalar>();
}

// normalize(sum_j v_j t_j). Throws NumericError naming the class on cancellation.
template <typename Scalar>
Embedding<Scalar> class_embedding(const UnitRows<Scalar>& selected, const Vector<Scalar>& weights,
                                  std::string_view class_name) {
  if (weights.size() != selected.rows() || weights.size() < 1)
    throw ContractError("class_embedding: weight count does not match prompt count");
  if ((weights.array() < Scalar(0)).any() || std::abs(weights.template cast<double>().sum() - 1.0) > kUnitTolerance)
    throw ContractError("class_embedding: weights for '" + std::string(class_name) + "' are not on the simplex");
  const Vector<Scalar> sum = selected.matrix().transpose() * weights;
  return Embedding<Scalar>::unit(normalized_copy(sum, class_name), class_name);
}

// Plain average of the selected prompts, then normalized.
template <typename Scalar>
Embedding<Scalar> average_class_embedding(const UnitRows<Scalar>& selected, std::string_view class_name) {
  if (selected.rows() < 1) throw ContractError("average_class_embedding: no selected prompts");
  const Vector<Scalar> mean = selected.matrix().colwise().mean().transpose();
  return Embedding<Scalar>::unit(normalized_copy(mean, class_name), class_name);
}

}  // namespace mrphe
