#include <algorithm>

#include "tabot/error.hpp"
#include "tabot/query.hpp"

namespace tabot {

using nlohmann::json;

namespace {

auto replace_all(std::string s, std::string_view from, std::string_view to) -> std::string {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

auto mention_value_json(const EntityMention& m) -> json {
    switch (m.kind) {
        case MentionKind::Number:
        case MentionKind::Date: return to_json(m.typed);
        default: return m.value;
    }
}

auto is_ref(const json& j) -> bool { return j.is_string() && j.get<std::string>().size() > 1 && j.get<std::string>()[0] == '$'; }

class Builder {
public:
    Builder(const MatchResult& match, const Intent& intent, const BotBundle& bundle)
        : match_(match), intent_(intent), bundle_(bundle) {}

    auto build() -> QueryPlan {
        json doc = substitute(intent_.plan_template);
        QueryPlan plan = plan_from_json(doc);
        expand_composites(plan);
        add_extra_filters(plan);
        return plan;
    }

private:
    auto binding(const std::string& slot) const -> const EntityMention* {
        auto it = match_.slots.find(slot);
        return it == match_.slots.end() ? nullptr : &it->second;
    }

    /// Fixed and bound slots as plain strings (field names, operator ids, variant values).
    auto word(const std::string& slot) const -> std::optional<std::string> {
        if (auto it = intent_.fixed.find(slot); it != intent_.fixed.end()) return it->second;
        if (const auto* m = binding(slot)) return m->value;
        return std::nullopt;
    }

    auto unbound(const std::string& slot) const -> bool {
        const auto* spec = intent_.slot(slot);
        if (spec == nullptr || spec->required) {
            throw Error(ErrorCode::UnboundSlot, "slot " + slot + " of " + intent_.name + " is not bound", slot);
        }
        return true;
    }

    auto literal(const std::string& slot) const -> std::optional<json> {
        if (const auto* m = binding(slot)) return mention_value_json(*m);
        if (auto it = intent_.fixed.find(slot); it != intent_.fixed.end()) return json(it->second);
        if (const auto* spec = intent_.slot(slot); spec != nullptr && spec->default_value) return *spec->default_value;
        unbound(slot);
        return std::nullopt;
    }

    auto lookup(const std::string& slot) const -> std::optional<json> {
        const auto* m = binding(slot);
        if (m == nullptr) {
            unbound(slot);
            return std::nullopt;
        }
        json clause = json::array();
        if (m->kind == MentionKind::CategoricalValue) {
            clause.push_back({{"field", m->field}, {"op", "equals"}, {"values", {m->value}}});
            return clause;
        }
        const auto& schema = bundle_.schema;
        const json value = mention_value_json(*m);
        for (const auto& f : schema.fields) {
            bool text_like = f.type == FieldType::Text;
            bool numeric_match = m->kind == MentionKind::Number && is_numeric(f.type);
            if (text_like || numeric_match) {
                clause.push_back({{"field", f.name}, {"op", "equals"}, {"values", {value}}});
            }
        }
        for (const auto& c : schema.composites) {
            clause.push_back({{"field", c.name}, {"op", "equals"}, {"values", {m->value}}});
        }
        if (clause.empty()) return std::nullopt;
        return clause;
    }

    auto substitute(const json& node) const -> json {
        if (node.is_object()) {
            json out = json::object();
            for (const auto& [key, value] : node.items()) {
                if (key == "limit" && is_ref(value)) {
                    auto v = literal(value.get<std::string>().substr(1));
                    if (!v) continue;
                    if (v->is_number_float()) {
                        out[key] = static_cast<std::int64_t>(v->get<double>());
                    } else {
                        out[key] = *v;
                    }
                    continue;
                }
                if (key == "filters") {
                    out[key] = substitute_filters(value);
                    continue;
                }
                if (key == "values" && value.is_array()) {
                    json values = json::array();
                    for (const auto& v : value) {
                        if (!is_ref(v)) {
                            values.push_back(v);
                        } else if (auto lit = literal(v.get<std::string>().substr(1))) {
                            values.push_back(*lit);
                        }
                    }
                    out[key] = std::move(values);
                    continue;
                }
                out[key] = substitute(value);
            }
            return out;
        }
        if (node.is_array()) {
            json out = json::array();
            for (const auto& v : node) out.push_back(substitute(v));
            return out;
        }
        if (is_ref(node)) {
            auto slot = node.get<std::string>().substr(1);
            if (auto w = word(slot)) return *w;
            unbound(slot);
            return nullptr;
        }
        return node;
    }

    auto substitute_filters(const json& clauses) const -> json {
        json out = json::array();
        for (const auto& clause : clauses) {
            json c = json::array();
            for (const auto& p : clause) {
                if (p.contains("lookup")) {
                    if (auto expanded = lookup(p.at("lookup").get<std::string>().substr(1))) {
                        for (auto& e : *expanded) c.push_back(std::move(e));
                    }
                    continue;
                }
                json q = substitute(p);
                // An optional value slot left empty drops its predicate.
                if (q.contains("values") && q.at("values").empty() && p.contains("values") && !p.at("values").empty()) continue;
                c.push_back(std::move(q));
            }
            if (!c.empty()) out.push_back(std::move(c));
        }
        return out;
    }

    /// `full_name = "Ada Colau"` as a conjunction over the parts when the
    /// literal splits into exactly one piece per part.
    auto expand_composites(QueryPlan& plan) const -> void {
        std::vector<Clause> out;
        for (auto& clause : plan.filters) {
            const CompositeField* c = clause.size() == 1 ? bundle_.schema.composite(clause[0].field) : nullptr;
            if (c == nullptr || clause[0].op != "equals" || clause[0].values.size() != 1) {
                out.push_back(std::move(clause));
                continue;
            }
            auto pieces = split(to_string(clause[0].values[0]), c->separator);
            if (pieces.size() != c->parts.size()) {
                out.push_back(std::move(clause));
                continue;
            }
            for (std::size_t i = 0; i < pieces.size(); ++i) {
                out.push_back({Predicate{c->parts[i], "equals", {Value{pieces[i]}}}});
            }
        }
        plan.filters = std::move(out);
    }

    static auto split(const std::string& s, const std::string& sep) -> std::vector<std::string> {
        std::vector<std::string> out;
        if (sep.empty()) return {s};
        std::size_t start = 0;
        while (true) {
            auto pos = s.find(sep, start);
            std::string piece = s.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
            if (!piece.empty()) out.push_back(piece);
            if (pos == std::string::npos) break;
            start = pos + sep.size();
        }
        return out;
    }

    auto add_extra_filters(QueryPlan& plan) const -> void {
        for (const auto& m : match_.extra_filters) {
            Predicate p{m.field, "equals", {Value{m.value}}};
            bool present = std::any_of(plan.filters.begin(), plan.filters.end(), [&](const Clause& c) {
                return c.size() == 1 && c[0] == p;
            });
            if (!present) plan.filters.push_back({p});
        }
    }

    const MatchResult& match_;
    const Intent& intent_;
    const BotBundle& bundle_;
};

}  // namespace

auto build_plan(const MatchResult& match, const BotBundle& bundle) -> QueryPlan {
    const Intent* intent = bundle.intent(match.intent);
    if (intent == nullptr) throw Error(ErrorCode::InvalidPlan, "unknown intent '" + match.intent + "'", match.intent);
    return Builder(match, *intent, bundle).build();
}

auto interpretation_notes(const MatchResult& match, const BotBundle& bundle, std::string_view locale)
    -> std::vector<std::string> {
    const Intent* intent = bundle.intent(match.intent);
    if (intent == nullptr) return {};
    auto it = intent->interpretation.find(std::string(locale));
    if (it == intent->interpretation.end()) it = intent->interpretation.find("en");
    if (it == intent->interpretation.end()) return {};
    std::string field;
    if (auto f = intent->fixed.find("FIELD"); f != intent->fixed.end()) {
        field = f->second;
    } else if (auto s = match.slots.find("FIELD"); s != match.slots.end()) {
        field = s->second.value;
    }
    return {replace_all(it->second, "{field}", display_name(bundle.schema, field, locale))};
}

}  // namespace tabot
