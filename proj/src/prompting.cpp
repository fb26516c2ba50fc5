#include "mrphe/prompting.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

namespace mrphe {

namespace {

std::size_t count_placeholders(std::string_view s) {
  std::size_t n = 0;
  for (auto pos = s.find("{}"); pos != std::string_view::npos; pos = s.find("{}", pos + 2)) ++n;
  return n;
}

// Trimmed, non-empty, first occurrence kept.
std::vector<std::string> dedup_trimmed(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : in) {
    auto t = trim(s);
    if (!t.empty() && seen.insert(t).second) out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string fill_template(std::string_view tmpl, std::string_view filler) {
  const auto pos = tmpl.find("{}");
  if (pos == std::string_view::npos) throw ConfigError("template has no {} placeholder: " + std::string(tmpl));
  std::string out(tmpl.substr(0, pos));
  out += filler;
  out += tmpl.substr(pos + 2);
  return out;
}

void TemplateSet::validate() const {
  for (const auto& t : templates)
    if (count_placeholders(t) != 1)
      throw ConfigError("templates: '" + t + "' must contain exactly one {} placeholder");
}

std::vector<std::string> Lexicon::class_names() const {
  std::vector<std::string> names;
  for (const auto& c : classes) names.push_back(c.class_name);
  return names;
}

Lexicon parse_lexicon(const nlohmann::json& j) {
  Lexicon lex;
  try {
    for (const auto& [key, _] : j.items())
      if (key != "templates" && key != "classes") throw ConfigError("lexicon: unknown key '" + key + "'");
    lex.templates.templates = string_list(j, "templates");
    for (const auto& c : j.at("classes")) {
      for (const auto& [key, _] : c.items())
        if (key != "name" && key != "synonyms" && key != "clinical_statements")
          throw ConfigError("lexicon class: unknown key '" + key + "'");
      ClassLexicon cls{trim(c.at("name").get<std::string>()), dedup_trimmed(string_list(c, "synonyms")),
                       dedup_trimmed(string_list(c, "clinical_statements"))};
      if (cls.class_name.empty()) throw ConfigError("lexicon: class with empty name");
      lex.classes.push_back(std::move(cls));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("lexicon: ") + e.what());
  }
  std::set<std::string> names;
  for (const auto& c : lex.classes)
    if (!names.insert(c.class_name).second) throw ConfigError("lexicon: duplicate class '" + c.class_name + "'");
  if (lex.classes.empty()) throw ConfigError("lexicon: no classes");
  lex.templates.validate();
  return lex;
}

Lexicon read_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("lexicon " + path.string() + ": " + e.what());
  }
  return parse_lexicon(j);
}

nlohmann::json lexicon_to_json(const Lexicon& lexicon) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : lexicon.classes)
    classes.push_back({{"name", c.class_name}, {"synonyms", c.synonyms}, {"clinical_statements", c.clinical_statements}});
  return {{"templates", lexicon.templates.templates}, {"classes", std::move(classes)}};
}

std::vector<std::string> generate_prompts(const ClassLexicon& lexicon, const TemplateSet& templates) {
  templates.validate();
  std::vector<std::string> fillers{trim(lexicon.class_name)};
  for (const auto& s : lexicon.synonyms) fillers.push_back(s);
  fillers = dedup_trimmed(fillers);

  std::vector<std::string> prompts;
  for (const auto& t : templates.templates)
    for (const auto& f : fillers) prompts.push_back(fill_template(t, f));
  for (const auto& s : lexicon.clinical_statements) prompts.push_back(s);
  prompts = dedup_trimmed(prompts);
  if (prompts.empty())
    throw ConfigError("class '" + lexicon.class_name + "': no prompts (no templates and no clinical statements)");
  return prompts;
}

}  // namespace mrphe
