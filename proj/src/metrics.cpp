#include "mrphe/metrics.hpp"

#include <map>
#include <set>

#include "mrphe/errors.hpp"

namespace mrphe {

F1Average parse_f1_average(const std::string& s) {
  if (s == "macro") return F1Average::Macro;
  if (s == "weighted") return F1Average::Weighted;
  throw ConfigError("f1_average: expected 'macro' or 'weighted', got '" + s + "'");
}

std::string to_string(F1Average a) { return a == F1Average::Macro ? "macro" : "weighted"; }

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              const std::vector<std::string>& class_names, F1Average average) {
  if (truth.size() != predicted.size()) throw DataError("truth and prediction counts differ");
  const auto C = class_names.size();
  MetricsReport r;
  r.class_names = class_names;
  r.average = average;
  r.n_samples = static_cast<long>(truth.size());
  r.confusion.assign(C, std::vector<long>(C, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= C || predicted[i] < 0 ||
        static_cast<std::size_t>(predicted[i]) >= C)
      throw DataError("label index out of range at sample " + std::to_string(i));
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }

  long correct = 0;
  double macro = 0.0, weighted = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    long predicted_c = 0, true_c = 0;
    for (std::size_t k = 0; k < C; ++k) {
      predicted_c += r.confusion[k][c];
      true_c += r.confusion[c][k];
    }
    const long tp = r.confusion[c][c];
    correct += tp;
    ClassMetrics m{class_names[c], 0.0, 0.0, 0.0, true_c, false};
    if (predicted_c > 0) m.precision = static_cast<double>(tp) / static_cast<double>(predicted_c);
    if (true_c > 0) m.recall = static_cast<double>(tp) / static_cast<double>(true_c);
    if (m.precision + m.recall > 0.0)
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
      m.f1_undefined = true;
    macro += m.f1;
    weighted += m.f1 * static_cast<double>(true_c);
    r.per_class.push_back(std::move(m));
  }
  if (C > 0) r.macro_f1 = macro / static_cast<double>(C);
  if (r.n_samples > 0) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_samples);
    r.weighted_f1 = weighted / static_cast<double>(r.n_samples);
  }
  return r;
}

MetricsReport compute_metrics(std::span<const IdLabel> predictions, std::span<const IdLabel> truth,
                              const std::vector<std::string>& class_names, F1Average average) {
  std::map<std::string, int> truth_by_id;
  for (const auto& t : truth)
    if (!truth_by_id.emplace(t.id, t.label).second) throw DataError("duplicate ground-truth id '" + t.id + "'");

  std::vector<int> y, yhat;
  std::set<std::string> seen;
  std::vector<std::string> unknown, missing;
  for (const auto& p : predictions) {
    if (!seen.insert(p.id).second) throw DataError("duplicate prediction id '" + p.id + "'");
    auto it = truth_by_id.find(p.id);
    if (it == truth_by_id.end()) {
      unknown.push_back(p.id);
      continue;
    }
    y.push_back(it->second);
    yhat.push_back(p.label);
  }
  for (const auto& [id, _] : truth_by_id)
    if (!seen.count(id)) missing.push_back(id);

  if (!unknown.empty() || !missing.empty()) {
    std::string msg = "prediction/ground-truth id mismatch;";
    auto list = [&](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" ") + what + ":";
      for (std::size_t i = 0; i < ids.size() && i < 20; ++i) msg += " " + ids[i];
      if (ids.size() > 20) msg += " ... (" + std::to_string(ids.size()) + " total)";
    };
    list("missing predictions", missing);
    list("unknown ids", unknown);
    throw DataError(msg);
  }
  return compute_metrics(y, yhat, class_names, average);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& m : per_class)
    classes.push_back({{"name", m.name},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"f1_undefined", m.f1_undefined}});
  return {{"n_samples", n_samples},
          {"accuracy", accuracy},
          {"f1_average", to_string(average)},
          {"f1", f1()},
          {"macro_f1", macro_f1},
          {"weighted_f1", weighted_f1},
          {"class_names", class_names},
          {"per_class", std::move(classes)},
          {"confusion_matrix", confusion}};
}

}  // namespace mrphe
