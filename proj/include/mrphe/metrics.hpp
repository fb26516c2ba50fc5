#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mrphe {

enum class F1Average { Macro, Weighted };

F1Average parse_f1_average(const std::string& s);
std::string to_string(F1Average a);

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
  bool f1_undefined = false;  // precision + recall == 0; f1 reported as 0
};

struct MetricsReport {
  std::vector<std::string> class_names;
  long n_samples = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  F1Average average = F1Average::Macro;
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<long>> confusion;  // [true][predicted]

  double f1() const { return average == F1Average::Macro ? macro_f1 : weighted_f1; }
  nlohmann::json to_json() const;
};

// Label indices in [0, class_names.size()).
MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              const std::vector<std::string>& class_names, F1Average average = F1Average::Macro);

struct IdLabel {
  std::string id;
  int label = 0;
};

// Joins predictions to ground truth by id. Throws DataError listing ids missing from either side.
MetricsReport compute_metrics(std::span<const IdLabel> predictions, std::span<const IdLabel> truth,
                              const std::vector<std::string>& class_names, F1Average average = F1Average::Macro);

}  // namespace mrphe
