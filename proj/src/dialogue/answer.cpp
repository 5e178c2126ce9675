#include <cmath>
#include <cstdio>
#include <set>

#include "tabot/dialogue.hpp"
#include "tabot/error.hpp"

namespace tabot {

using nlohmann::json;

auto answer_kind_name(AnswerKind k) -> std::string_view {
    switch (k) {
        case AnswerKind::Direct: return "Direct";
        case AnswerKind::Clarification: return "Clarification";
        case AnswerKind::Paged: return "Paged";
        case AnswerKind::FallbackAnswer: return "FallbackAnswer";
        case AnswerKind::Error: return "Error";
        case AnswerKind::Help: return "Help";
    }
    return "Error";
}

auto format_value(const Value& v) -> std::string {
    if (is_missing(v)) return "unknown";
    if (const auto* b = std::get_if<bool>(&v)) return *b ? "yes" : "no";
    if (const auto* d = std::get_if<double>(&v)) {
        if (!std::isfinite(*d)) return to_string(v);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f", *d);
        std::string s = buf;
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
        return s == "-0" ? "0" : s;
    }
    return to_string(v);
}

auto format_result(const ResultSet& r) -> std::string {
    switch (r.shape) {
        case ResultShape::Scalar: return r.rows.empty() ? "unknown" : format_value(r.scalar());
        case ResultShape::GroupedPairs: {
            std::vector<std::string> parts;
            for (const auto& row : r.rows) {
                parts.push_back(format_value(row.at(0)) + ": " + format_value(row.at(1)));
            }
            if (parts.empty()) return "no groups";
            return text::join(parts, ", ");
        }
        case ResultShape::Rows: break;
    }
    if (r.rows.empty()) return "No rows match.";
    return r.rows.size() == 1 ? "1 row" : std::to_string(r.rows.size()) + " rows";
}

auto answer_to_json(const Answer& a) -> json {
    json j{{"kind", answer_kind_name(a.kind)},
           {"text", a.text},
           {"fallbackWarning", a.fallback_warning},
           {"interpretationNotes", a.interpretation_notes},
           {"suggestedReplies", a.suggested_replies}};
    if (a.payload) {
        json page = result_to_json(a.payload->result);
        page["offset"] = a.payload->offset;
        page["total"] = a.payload->total;
        j["page"] = std::move(page);
    } else {
        j["page"] = nullptr;
    }
    j["intent"] = a.intent ? json(*a.intent) : json();
    j["confidence"] = a.confidence ? json(*a.confidence) : json();
    j["error"] = a.error ? json(error_code_name(*a.error)) : json();
    j["turn"] = a.turn ? json(*a.turn) : json();
    return j;
}

namespace {

auto category_label(PatternCategory c) -> std::string {
    switch (c) {
        case PatternCategory::DatasetLevel: return "About the whole dataset";
        case PatternCategory::FieldLevel: return "About a field";
        case PatternCategory::CellValueLevel: return "About specific values";
        case PatternCategory::Aggregation: return "Totals and averages";
        case PatternCategory::Meta: return "About the data itself";
    }
    return "Other";
}

/// A training sentence with every slot placeholder filled, or nothing.
auto example_sentence(const Intent& intent, std::string_view locale) -> std::optional<std::string> {
    auto it = intent.training_sentences.find(std::string(locale));
    if (it == intent.training_sentences.end()) it = intent.training_sentences.find("en");
    if (it == intent.training_sentences.end()) return std::nullopt;
    std::set<std::string> fragments{"FIELD", "OPERATOR"};
    for (const auto& s : intent.slots) fragments.insert(s.fragment);
    for (const auto& sentence : it->second) {
        bool has_placeholder = false;
        for (const auto& t : text::tokenize(sentence)) {
            if (fragments.count(t.surface) != 0) has_placeholder = true;
        }
        if (!has_placeholder) return sentence;
    }
    return std::nullopt;
}

}  // namespace

auto help_answer(const BotBundle& bundle, std::string_view locale) -> Answer {
    Answer a;
    a.kind = AnswerKind::Help;
    std::string text = "I can answer questions about this dataset:";
    for (auto c : {PatternCategory::DatasetLevel, PatternCategory::FieldLevel, PatternCategory::CellValueLevel,
                   PatternCategory::Aggregation, PatternCategory::Meta}) {
        bool present = false;
        std::optional<std::string> example;
        for (const auto& intent : bundle.intents) {
            if (intent.category != c) continue;
            present = true;
            if (!example) example = example_sentence(intent, locale);
            if (example) break;
        }
        if (!present) continue;
        text += "\n- " + category_label(c);
        if (example) {
            text += ", e.g. \"" + *example + "\"";
            a.suggested_replies.push_back(*example);
        }
    }
    a.text = std::move(text);
    return a;
}

}  // namespace tabot
