#include "cnorm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cnorm/error.hpp"
#include "cnorm/text.hpp"

namespace cnorm {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  return in;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

const std::string& require_string(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw Error("parse_error", "line " + std::to_string(line) + ": missing string field '" + key + "'");
  return it->get_ref<const std::string&>();
}

RecognitionRecord record_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw Error("parse_error", "line " + std::to_string(line) + ": not an object");
  RecognitionRecord r;
  r.item_id = require_string(j, "item_id", line);
  r.theme_id = require_string(j, "theme_id", line);
  r.label = require_string(j, "label", line);
  r.reasoning_text = require_string(j, "reasoning_text", line);

  auto pass = j.find("pass_index");
  if (pass == j.end() || !pass->is_number_integer())
    throw Error("parse_error", "line " + std::to_string(line) + ": missing integer field 'pass_index'");
  r.pass_index = pass->get<int>();
  if (r.pass_index < 1 || r.pass_index > 3)
    throw Error("parse_error", "line " + std::to_string(line) + ": pass_index must be 1, 2 or 3");

  if (r.item_id.empty() || r.theme_id.empty())
    throw Error("parse_error", "line " + std::to_string(line) + ": empty item_id or theme_id");
  if (is_blank(r.reasoning_text))
    throw Error("parse_error", "line " + std::to_string(line) + ": reasoning_text is blank");

  const std::string& src = require_string(j, "source", line);
  if (src == "llm") {
    r.source = RecordSource::llm;
  } else if (src == "human") {
    r.source = RecordSource::human;
  } else {
    throw Error("parse_error", "line " + std::to_string(line) + ": unknown source '" + src + "'");
  }

  if (auto c = j.find("correct"); c != j.end() && !c->is_null()) {
    if (!c->is_boolean()) throw Error("parse_error", "line " + std::to_string(line) + ": 'correct' must be boolean");
    r.correct = c->get<bool>();
  }
  if (auto f = j.find("flagged_unclear"); f != j.end() && !f->is_null()) {
    if (!f->is_boolean())
      throw Error("parse_error", "line " + std::to_string(line) + ": 'flagged_unclear' must be boolean");
    r.flagged_unclear = f->get<bool>();
  }
  return r;
}

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

int parse_code(const std::string& cell, const std::string& theme, const char* column) {
  int v = 0;
  try {
    std::size_t used = 0;
    v = std::stoi(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
  } catch (const std::exception&) {
    throw Error("bad_factor_code", theme + ": " + column + " '" + cell + "' is not an integer");
  }
  if (v != 1 && v != 2)
    throw Error("bad_factor_code", theme + ": " + column + " must be 1 or 2, got " + cell);
  return v;
}

}  // namespace

std::optional<double> ThemeCorpus::accuracy() const {
  std::size_t judged = 0, right = 0;
  for (const auto& it : items) {
    if (!it.correct) continue;
    ++judged;
    if (*it.correct) ++right;
  }
  if (judged == 0) return std::nullopt;
  return static_cast<double>(right) / static_cast<double>(judged);
}

std::string to_string(RecordSource s) { return s == RecordSource::llm ? "llm" : "human"; }

std::string to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::three_way_disagreement: return "three_way_disagreement";
    case ExclusionReason::flagged_unclear: return "flagged_unclear";
    case ExclusionReason::none: break;
  }
  return "none";
}

std::string normalize_label(std::string_view label) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : label) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<RecognitionRecord> parse_corpus(std::istream& in) {
  std::vector<RecognitionRecord> out;
  std::set<std::pair<std::string, int>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("parse_error", "line " + std::to_string(lineno) + ": " + e.what());
    }
    auto rec = record_from_json(j, lineno);
    if (!seen.emplace(rec.item_id, rec.pass_index).second)
      throw Error("duplicate_pass", "line " + std::to_string(lineno) + ": item '" + rec.item_id +
                                        "' pass " + std::to_string(rec.pass_index) + " repeated");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RecognitionRecord> load_corpus(const std::string& path, CorpusFormat format) {
  (void)format;  // jsonl is the only format
  auto in = open_input(path);
  return parse_corpus(in);
}

std::string record_to_json_line(const RecognitionRecord& r) {
  json j = {{"item_id", r.item_id},         {"theme_id", r.theme_id},
            {"pass_index", r.pass_index},   {"label", r.label},
            {"reasoning_text", r.reasoning_text}, {"source", to_string(r.source)}};
  if (r.correct) j["correct"] = *r.correct;
  if (r.pass_index == 1) j["flagged_unclear"] = r.flagged_unclear;
  return j.dump();
}

ResolvedItem resolve_item(std::span<const RecognitionRecord> passes) {
  if (passes.empty()) throw Error("empty_input", "no records for item");
  const RecognitionRecord* by_pass[4] = {nullptr, nullptr, nullptr, nullptr};
  for (const auto& r : passes) {
    if (r.item_id != passes.front().item_id)
      throw Error("mixed_items", "records for '" + passes.front().item_id + "' and '" + r.item_id + "'");
    if (r.theme_id != passes.front().theme_id)
      throw Error("mixed_themes", "item '" + r.item_id + "' spans themes");
    if (r.pass_index < 1 || r.pass_index > 3)
      throw Error("parse_error", "item '" + r.item_id + "': pass_index out of range");
    if (by_pass[r.pass_index])
      throw Error("duplicate_pass", "item '" + r.item_id + "' pass " + std::to_string(r.pass_index));
    by_pass[r.pass_index] = &r;
  }

  ResolvedItem out;
  out.item_id = passes.front().item_id;
  out.theme_id = passes.front().theme_id;

  const auto* first = by_pass[1];
  if (first) out.correct = first->correct;
  if (first && first->flagged_unclear) {
    out.excluded = true;
    out.exclusion_reason = ExclusionReason::flagged_unclear;
    return out;
  }
  if (!first || !by_pass[2])
    throw Error("missing_pass", "item '" + out.item_id + "' needs passes 1 and 2");

  const std::string l1 = normalize_label(first->label);
  const std::string l2 = normalize_label(by_pass[2]->label);
  const auto* third = by_pass[3];

  if (l1 == l2) {
    if (third) throw Error("unexpected_third_pass", "item '" + out.item_id + "': passes 1 and 2 agree");
    out.final_label = l1;
    out.reasoning_text = first->reasoning_text;
    return out;
  }
  if (!third) throw Error("needs_third_pass", "item '" + out.item_id + "'");

  const std::string l3 = normalize_label(third->label);
  if (l3 == l1 || l3 == l2) {
    out.final_label = l3;
    // The majority pass with the lower index supplies the text.
    out.reasoning_text = (l3 == l1 ? first : by_pass[2])->reasoning_text;
    return out;
  }
  out.excluded = true;
  out.exclusion_reason = ExclusionReason::three_way_disagreement;
  return out;
}

std::vector<ResolvedItem> resolve_all(std::span<const RecognitionRecord> records) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<RecognitionRecord>> groups;
  for (const auto& r : records) {
    auto [it, inserted] = groups.try_emplace(r.item_id);
    if (inserted) order.push_back(r.item_id);
    it->second.push_back(r);
  }
  std::vector<ResolvedItem> out;
  out.reserve(order.size());
  for (const auto& id : order) out.push_back(resolve_item(groups.at(id)));
  return out;
}

std::string resolved_to_json_line(const ResolvedItem& item) {
  json j = {{"item_id", item.item_id},
            {"theme_id", item.theme_id},
            {"excluded", item.excluded},
            {"exclusion_reason", to_string(item.exclusion_reason)}};
  if (item.final_label) j["final_label"] = *item.final_label;
  if (!item.excluded) j["reasoning_text"] = item.reasoning_text;
  if (item.correct) j["correct"] = *item.correct;
  return j.dump();
}

void write_resolved(const std::string& path, std::span<const ResolvedItem> items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path);
  for (const auto& it : items) out << resolved_to_json_line(it) << '\n';
}

std::map<std::string, FactorRow> parse_factors(std::istream& in) {
  std::string header;
  while (std::getline(in, header) && is_blank(header)) {
  }
  if (header.empty()) throw Error("parse_error", "factors table has no header");
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  auto cols = split_row(header, delim);
  auto col_index = [&](const char* name) -> std::size_t {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw Error("parse_error", std::string("factors table lacks column ") + name);
    return static_cast<std::size_t>(it - cols.begin());
  };
  const auto ti = col_index("theme_id"), ai = col_index("abstract_code"), fi = col_index("focus_code");

  std::map<std::string, FactorRow> out;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    auto cells = split_row(line, delim);
    if (cells.size() < cols.size())
      throw Error("parse_error", "factors line " + std::to_string(lineno) + ": too few columns");
    FactorRow row;
    row.theme_id = cells[ti];
    row.abstract_code = parse_code(cells[ai], row.theme_id, "abstract_code");
    row.focus_code = parse_code(cells[fi], row.theme_id, "focus_code");
    if (!out.emplace(row.theme_id, row).second)
      throw Error("parse_error", "factors line " + std::to_string(lineno) + ": duplicate theme " + row.theme_id);
  }
  return out;
}

std::map<std::string, FactorRow> load_factors(const std::string& path) {
  auto in = open_input(path);
  return parse_factors(in);
}

std::map<std::string, ThemeLexicon> parse_lexicons(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("parse_error", std::string("lexicons: ") + e.what());
  }
  if (!j.is_object()) throw Error("parse_error", "lexicons: top level must be an object");
  std::map<std::string, ThemeLexicon> out;
  for (const auto& [theme, entry] : j.items()) {
    ThemeLexicon lex;
    auto read = [&](const char* key, std::set<std::string>& dst) {
      auto it = entry.find(key);
      if (it == entry.end()) return;
      if (!it->is_array()) throw Error("parse_error", "lexicons: " + theme + "." + key + " must be an array");
      for (const auto& t : *it) {
        auto term = fold_case(t.get<std::string>());
        if (!term.empty()) dst.insert(std::move(term));
      }
    };
    read("example_terms", lex.example_terms);
    read("object_terms", lex.object_terms);
    out.emplace(theme, std::move(lex));
  }
  return out;
}

std::map<std::string, ThemeLexicon> load_lexicons(const std::string& path) {
  auto in = open_input(path);
  return parse_lexicons(in);
}

std::vector<ThemeCorpus> assemble_themes(std::span<const ResolvedItem> resolved,
                                         const std::map<std::string, FactorRow>& factors,
                                         const std::map<std::string, ThemeLexicon>& lexicons) {
  std::map<std::string, ThemeCorpus> by_theme;
  for (const auto& item : resolved) {
    auto f = factors.find(item.theme_id);
    if (f == factors.end()) throw Error("missing_factor_row", "theme '" + item.theme_id + "'");
    for (int code : {f->second.abstract_code, f->second.focus_code})
      if (code != 1 && code != 2)
        throw Error("bad_factor_code", item.theme_id + ": codes must be 1 or 2, got " + std::to_string(code));
    if (item.excluded) continue;
    auto [it, inserted] = by_theme.try_emplace(item.theme_id);
    auto& tc = it->second;
    if (inserted) {
      tc.theme_id = item.theme_id;
      tc.abstract_code = f->second.abstract_code;
      tc.focus_code = f->second.focus_code;
      if (auto l = lexicons.find(item.theme_id); l != lexicons.end()) {
        tc.example_lexicon = l->second.example_terms;
        tc.object_lexicon = l->second.object_terms;
      }
    }
    tc.items.push_back(item);
  }
  std::vector<ThemeCorpus> out;
  out.reserve(by_theme.size());
  for (auto& [id, tc] : by_theme) out.push_back(std::move(tc));
  return out;
}

}  // namespace cnorm
