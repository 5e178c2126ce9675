#include <algorithm>

#include "tabot/dialogue.hpp"
#include "tabot/error.hpp"
#include "tabot/parse.hpp"
#include "tabot/query.hpp"

namespace tabot {

auto system_clock() -> Clock {
    return [] { return std::chrono::system_clock::now(); };
}

auto state_name(const SessionState& s) -> std::string_view {
    switch (s.index()) {
        case 0: return "Idle";
        case 1: return "AwaitingSlot";
        case 2: return "AwaitingGroupChoice";
        case 3: return "AwaitingPresentationChoice";
        case 4: return "AwaitingPage";
    }
    return "Idle";
}

namespace {

constexpr const char* kFirstPage = "Show the first page";
constexpr const char* kShowAll = "Show all";
constexpr const char* kCountOnly = "Just the count";

/// What one step produced, before bookkeeping.
struct Step {
    Answer answer;
    SessionState next = state::Idle{};
    OutcomeKind outcome = OutcomeKind::Hit;
    std::optional<std::string> intent;
    std::optional<double> confidence;
};

auto words(std::string_view reply) -> std::vector<std::string> {
    std::vector<std::string> out;
    for (const auto& t : text::tokenize(reply)) out.push_back(t.key);
    return out;
}

auto has_word(const std::vector<std::string>& ws, std::string_view w) -> bool {
    return std::find(ws.begin(), ws.end(), w) != ws.end();
}

auto is_cancel(const std::vector<std::string>& ws) -> bool {
    return ws.size() <= 2 && (has_word(ws, "cancel") || has_word(ws, "stop") || has_word(ws, "nevermind"));
}

auto localized(const std::map<std::string, std::string>& m, const std::string& locale) -> std::optional<std::string> {
    if (auto it = m.find(locale); it != m.end()) return it->second;
    if (auto it = m.find("en"); it != m.end()) return it->second;
    return std::nullopt;
}

auto replace_all(std::string s, std::string_view from, std::string_view to) -> std::string {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

class Turn {
public:
    Turn(const DialogueContext& ctx, const std::string& locale)
        : ctx_(ctx), bundle_(ctx.engine->bundle()), locale_(locale) {}

    auto idle(std::string_view utterance) -> Step {
        Understanding u;
        try {
            u = ctx_.engine->understand(utterance, locale_);
        } catch (const Error& e) {
            return error_step("Please type a question.", e.code(), OutcomeKind::Miss);
        }
        const auto& m = u.match;
        if (!m.accepted(bundle_.matcher.accept_threshold)) return fallback(utterance);
        if (!m.missing_required.empty()) return ask_slot(m, m.missing_required.front(), 0);
        return execute_match(m);
    }

    auto awaiting_slot(const state::AwaitingSlot& st, std::string_view reply) -> Step {
        auto ws = words(reply);
        if (is_cancel(ws)) return cancelled();
        const auto* intent = bundle_.intent(st.match.intent);
        if (intent == nullptr) return cancelled();
        MatchResult m = st.match;
        Utterance u;
        std::vector<EntityMention> mentions;
        try {
            u = tokenize_utterance(reply, locale_);
            mentions = ctx_.engine->recognize(u);
        } catch (const Error&) {
            return retry_slot(st, "");
        }
        std::vector<bool> used(mentions.size(), false);
        bool filled = fill(*intent, m, st.slot, mentions, used, reply);
        if (!filled) {
            // A complete new question abandons the clarification.
            auto fresh = ctx_.engine->match(u, mentions);
            if (fresh.accepted(bundle_.matcher.accept_threshold) && fresh.missing_required.empty()) return idle(reply);
            return retry_slot(st, "");
        }
        // The reply may carry more than was asked ("salary greater than 5").
        for (const auto& name : std::vector<std::string>(m.missing_required)) {
            if (name != st.slot) fill(*intent, m, name, mentions, used, {});
        }
        auto checked = validate_type_consistency(m, bundle_);
        if (checked.violation) return retry_slot(st, "That does not fit: " + *checked.violation + ".");
        if (!m.missing_required.empty()) return ask_slot(m, m.missing_required.front(), 0);
        return execute_match(m);
    }

    auto awaiting_group(const state::AwaitingGroupChoice& st, std::string_view reply) -> Step {
        auto ws = words(reply);
        if (is_cancel(ws)) return cancelled();
        std::optional<std::string> chosen;
        if (ws.size() == 1) {
            if (auto n = parse::integer(ws.front()); n && *n >= 1 && static_cast<std::size_t>(*n) <= st.options.size()) {
                chosen = st.options[static_cast<std::size_t>(*n - 1)];
            }
        }
        if (!chosen) {
            try {
                auto u = tokenize_utterance(reply, locale_);
                for (const auto& mention : ctx_.engine->recognize(u)) {
                    if (mention.kind != MentionKind::Field) continue;
                    if (std::find(st.options.begin(), st.options.end(), mention.value) != st.options.end()) {
                        chosen = mention.value;
                        break;
                    }
                }
            } catch (const Error&) {
            }
        }
        if (!chosen) {
            auto folded = text::normalize_name(reply);
            for (const auto& o : st.options) {
                if (text::normalize_name(o) == folded || text::normalize_name(display_name(bundle_.schema, o, locale_)) == folded) {
                    chosen = o;
                }
            }
        }
        if (!chosen) {
            if (st.failures + 1 > ctx_.config.max_reprompts) return abandoned(st.match);
            auto next = st;
            ++next.failures;
            Step s = group_question(next);
            s.answer.text = "Please pick one of the options. " + s.answer.text;
            s.outcome = OutcomeKind::Miss;
            return s;
        }
        return run_plan(st.match, resolve_group(st.plan, st.group, *chosen));
    }

    auto awaiting_presentation(const state::AwaitingPresentationChoice& st, std::string_view reply) -> Step {
        auto ws = words(reply);
        if (is_cancel(ws)) return cancelled();
        enum { None, First, All, Count } choice = None;
        if (ws.size() == 1 && ws.front() == "1") choice = First;
        if (ws.size() == 1 && ws.front() == "2") choice = All;
        if (ws.size() == 1 && ws.front() == "3") choice = Count;
        if (choice == None) {
            if (has_word(ws, "count") || has_word(ws, "many")) {
                choice = Count;
            } else if (has_word(ws, "all") || has_word(ws, "everything")) {
                choice = All;
            } else if (has_word(ws, "first") || has_word(ws, "page") || has_word(ws, "next")) {
                choice = First;
            }
        }
        Step s;
        s.intent = st.match.intent;
        s.confidence = st.match.confidence;
        switch (choice) {
            case First: return page(st.result, st.match, 0, st.fallback);
            case All:
                s.answer = result_answer(st.result, st.fallback);
                s.answer.payload = ResultPage{st.result, 0, st.result.rows.size()};
                return s;
            case Count:
                s.answer.kind = st.fallback ? AnswerKind::FallbackAnswer : AnswerKind::Direct;
                s.answer.fallback_warning = st.fallback;
                s.answer.text = std::string(st.fallback ? "\xE2\x9A\xA0 approximate: " : "") +
                                std::to_string(st.result.rows.size()) + " rows";
                return s;
            case None: break;
        }
        if (st.failures + 1 > ctx_.config.max_reprompts) return abandoned(st.match);
        auto next = st;
        ++next.failures;
        s = presentation_question(next);
        s.answer.text = "I did not get that choice. " + s.answer.text;
        s.answer.error = ErrorCode::InvalidChoice;
        s.outcome = OutcomeKind::Miss;
        return s;
    }

    auto awaiting_page(const state::AwaitingPage& st, std::string_view reply) -> Step {
        auto ws = words(reply);
        bool next = ws.size() <= 3 && (has_word(ws, "next") || has_word(ws, "more") || has_word(ws, "continue"));
        if (!next) return idle(reply);
        if (st.cursor >= st.result.rows.size()) {
            Step s;
            s.answer.text = "No more rows.";
            s.intent = st.match.intent;
            s.confidence = st.match.confidence;
            return s;
        }
        return page(st.result, st.match, st.cursor, st.fallback);
    }

private:
    auto error_step(std::string text, ErrorCode code, OutcomeKind outcome) -> Step {
        Step s;
        s.answer.kind = AnswerKind::Error;
        s.answer.text = std::move(text);
        s.answer.error = code;
        s.outcome = outcome;
        return s;
    }

    auto cancelled() -> Step {
        Step s;
        s.answer.text = "OK, let's start over.";
        s.outcome = OutcomeKind::Miss;
        return s;
    }

    auto abandoned(const MatchResult& m) -> Step {
        Step s;
        s.answer = help_answer(bundle_, locale_);
        s.answer.text = "Let's start over. " + s.answer.text;
        s.outcome = OutcomeKind::Miss;
        s.intent = m.intent;
        return s;
    }

    auto fallback(std::string_view utterance) -> Step {
        auto [answer, result] = route_fallback(utterance, ctx_);
        if (!result) {
            Step s;
            s.answer = std::move(answer);
            s.outcome = OutcomeKind::Miss;
            return s;
        }
        MatchResult none;
        if (result->shape == ResultShape::Rows && result->rows.size() > ctx_.config.page_size) {
            Step s = page(*result, none, 0, true);
            s.outcome = OutcomeKind::Fallback;
            return s;
        }
        Step s;
        s.answer = std::move(answer);
        s.answer.payload = ResultPage{*result, 0, result->rows.size()};
        s.outcome = OutcomeKind::Fallback;
        return s;
    }

    auto prompt_for(const MatchResult& m, const IntentSlot& slot) -> std::string {
        std::string prompt = localized(slot.prompt, locale_).value_or("Please give me the " + slot.name + ".");
        std::string field = "the field";
        if (auto it = m.slots.find("FIELD"); it != m.slots.end()) field = display_name(bundle_.schema, it->second.value, locale_);
        std::string op = "compared";
        if (auto it = m.slots.find("OPERATOR"); it != m.slots.end()) {
            op = replace_all(it->second.value, "_", " ");
            if (const auto* o = bundle_.op(it->second.value)) op = localized(o->prompt_forms, locale_).value_or(op);
        }
        return replace_all(replace_all(prompt, "{field}", field), "{operator}", op);
    }

    auto suggestions_for(const MatchResult& m, const IntentSlot& slot) -> std::vector<std::string> {
        std::vector<std::string> out;
        const Intent* intent = bundle_.intent(m.intent);
        auto fits = [&](const EntityMention& candidate) {
            return intent != nullptr && mention_fits(*intent, slot, candidate, m.slots, bundle_);
        };
        for (const auto& e : bundle_.entities) {
            for (const auto& [value, phrases] : e.lexicon) {
                if (out.size() >= 10) return out;
                EntityMention candidate;
                candidate.value = value;
                candidate.entity = e.name;
                candidate.field = e.field;
                switch (e.kind) {
                    case EntityKind::FieldEntity: candidate.kind = MentionKind::Field; break;
                    case EntityKind::OperatorEntity: candidate.kind = MentionKind::Operator; break;
                    case EntityKind::CategoricalValueEntity: candidate.kind = MentionKind::CategoricalValue; break;
                    default: continue;
                }
                if (!fits(candidate)) continue;
                if (candidate.kind == MentionKind::Field) {
                    out.push_back(display_name(bundle_.schema, value, locale_));
                } else if (!phrases.empty()) {
                    out.push_back(phrases.front());
                }
            }
        }
        return out;
    }

    auto ask_slot(const MatchResult& m, const std::string& slot_name, int failures) -> Step {
        Step s;
        s.intent = m.intent;
        s.confidence = m.confidence;
        const auto* intent = bundle_.intent(m.intent);
        const auto* slot = intent != nullptr ? intent->slot(slot_name) : nullptr;
        if (slot == nullptr) return error_step("Sorry, something went wrong with that question.", ErrorCode::UnboundSlot, OutcomeKind::Miss);
        s.answer.kind = AnswerKind::Clarification;
        s.answer.text = prompt_for(m, *slot);
        s.answer.suggested_replies = suggestions_for(m, *slot);
        s.answer.intent = m.intent;
        s.answer.confidence = m.confidence;
        s.next = state::AwaitingSlot{m, slot_name, failures};
        return s;
    }

    auto retry_slot(const state::AwaitingSlot& st, const std::string& why) -> Step {
        if (st.failures + 1 > ctx_.config.max_reprompts) return abandoned(st.match);
        Step s = ask_slot(st.match, st.slot, st.failures + 1);
        s.answer.text = (why.empty() ? std::string("I could not use that. ") : why + " ") + s.answer.text;
        s.outcome = OutcomeKind::Miss;
        return s;
    }

    /// Binds the first mention that fits `slot`; free text fills text-like slots.
    auto fill(const Intent& intent, MatchResult& m, const std::string& slot_name, const std::vector<EntityMention>& mentions,
              std::vector<bool>& used, std::string_view raw_reply) -> bool {
        const auto* slot = intent.slot(slot_name);
        if (slot == nullptr) return false;
        std::optional<EntityMention> found;
        for (std::size_t i = 0; i < mentions.size(); ++i) {
            if (used[i] || !mention_fits(intent, *slot, mentions[i], m.slots, bundle_)) continue;
            used[i] = true;
            found = mentions[i];
            break;
        }
        if (!found && !raw_reply.empty()) {
            std::string reply(text::trim(raw_reply));
            if (reply.size() >= 2 && (reply.front() == '\'' || reply.front() == '"') && reply.back() == reply.front()) {
                reply = reply.substr(1, reply.size() - 2);
            }
            EntityMention t;
            t.kind = MentionKind::Text;
            t.entity = std::string(kTextEntity);
            t.value = reply;
            t.typed = reply;
            t.end = raw_reply.size();
            if (!reply.empty() && mention_fits(intent, *slot, t, m.slots, bundle_)) found = t;
        }
        if (!found) return false;
        m.slots[slot_name] = *found;
        m.missing_required.erase(std::remove(m.missing_required.begin(), m.missing_required.end(), slot_name),
                                 m.missing_required.end());
        if (intent.field_from && *intent.field_from == slot_name && m.slots.count("FIELD") == 0) {
            EntityMention f;
            f.kind = MentionKind::Field;
            f.entity = std::string(kFieldEntity);
            f.value = found->field;
            f.typed = found->field;
            f.synthetic = true;
            m.slots["FIELD"] = f;
        }
        return true;
    }

    auto group_question(const state::AwaitingGroupChoice& st) -> Step {
        Step s;
        s.intent = st.match.intent;
        s.confidence = st.match.confidence;
        std::vector<std::string> names;
        for (const auto& o : st.options) names.push_back(display_name(bundle_.schema, o, locale_));
        s.answer.kind = AnswerKind::Clarification;
        s.answer.text = "Which " + display_name(bundle_.schema, st.group, locale_) + " do you mean: " + text::join(names, ", ") + "?";
        s.answer.suggested_replies = names;
        s.answer.intent = st.match.intent;
        s.next = st;
        return s;
    }

    auto execute_match(const MatchResult& m) -> Step {
        QueryPlan plan;
        try {
            plan = build_plan(m, bundle_);
        } catch (const Error& e) {
            return error_step("Sorry, I could not build a query for that.", e.code(), OutcomeKind::Miss);
        }
        return run_plan(m, plan);
    }

    auto run_plan(const MatchResult& m, const QueryPlan& plan) -> Step {
        auto groups = plan_group_refs(plan, bundle_.schema);
        if (!groups.empty()) {
            const auto* g = bundle_.schema.group(groups.front());
            state::AwaitingGroupChoice st;
            st.group = groups.front();
            st.match = m;
            st.plan = plan;
            if (g != nullptr) {
                if (g->default_member) st.options.push_back(*g->default_member);
                for (const auto& member : g->members) {
                    if (member != g->default_member) st.options.push_back(member);
                }
            }
            return group_question(st);
        }
        Step s;
        s.intent = m.intent;
        s.confidence = m.confidence;
        if (plan.projection.kind == ProjectionKind::Help) {
            s.answer = help_answer(bundle_, locale_);
            s.answer.intent = m.intent;
            s.answer.confidence = m.confidence;
            return s;
        }
        ResultSet result;
        try {
            result = execute(plan, *ctx_.table, bundle_.schema);
        } catch (const Error& e) {
            return error_step("Sorry, that question does not fit this data.", e.code(), OutcomeKind::Miss);
        }
        auto notes = interpretation_notes(m, bundle_, locale_);
        if (result.shape == ResultShape::Rows && result.rows.size() > ctx_.config.page_size) {
            s = presentation_question({result, m, false, 0});
        } else {
            s.answer = result_answer(result, false);
            if (plan.projection.kind == ProjectionKind::MetaSource) {
                s.answer.text = "The data comes from " + format_value(result.scalar()) + ".";
            } else if (plan.projection.kind == ProjectionKind::MetaAge) {
                s.answer.text = is_missing(result.scalar()) ? "I do not know when the data was imported."
                                                            : "The data was imported at " + format_value(result.scalar()) + ".";
            }
            s.answer.payload = ResultPage{result, 0, result.rows.size()};
        }
        if (result.tie_cut) notes.push_back("more rows tie with the last one shown");
        s.answer.interpretation_notes = std::move(notes);
        s.answer.intent = m.intent;
        s.answer.confidence = m.confidence;
        return s;
    }

    auto result_answer(const ResultSet& r, bool fallback) -> Answer {
        Answer a;
        a.kind = fallback ? AnswerKind::FallbackAnswer : AnswerKind::Direct;
        a.fallback_warning = fallback;
        a.text = std::string(fallback ? "\xE2\x9A\xA0 approximate: " : "") + format_result(r);
        return a;
    }

    auto presentation_question(const state::AwaitingPresentationChoice& st) -> Step {
        Step s;
        s.intent = st.match.intent;
        s.confidence = st.match.confidence;
        s.answer.kind = AnswerKind::Clarification;
        s.answer.fallback_warning = st.fallback;
        s.answer.text = "The answer has " + std::to_string(st.result.rows.size()) +
                        " rows. How do you want to see it? 1) first page, 2) all rows, 3) just the count.";
        s.answer.suggested_replies = {kFirstPage, kShowAll, kCountOnly};
        s.next = st;
        return s;
    }

    auto page(const ResultSet& full, const MatchResult& m, std::size_t from, bool fallback) -> Step {
        const std::size_t n = full.rows.size();
        const std::size_t to = std::min(n, from + ctx_.config.page_size);
        ResultSet slice = full;
        slice.rows.assign(full.rows.begin() + static_cast<std::ptrdiff_t>(from),
                          full.rows.begin() + static_cast<std::ptrdiff_t>(to));
        Step s;
        s.intent = m.intent.empty() ? std::nullopt : std::optional<std::string>(m.intent);
        s.confidence = m.intent.empty() ? std::nullopt : std::optional<double>(m.confidence);
        s.answer.kind = fallback ? AnswerKind::FallbackAnswer : AnswerKind::Paged;
        s.answer.fallback_warning = fallback;
        s.answer.text = std::string(fallback ? "\xE2\x9A\xA0 approximate: " : "") + "Rows " + std::to_string(from + 1) +
                        "-" + std::to_string(to) + " of " + std::to_string(n) + ".";
        if (to < n) {
            s.answer.text += " Say \"next\" for more.";
            s.answer.suggested_replies = {"next"};
        }
        s.answer.payload = ResultPage{std::move(slice), from, n};
        s.next = state::AwaitingPage{full, m, to, fallback};
        return s;
    }

    const DialogueContext& ctx_;
    const BotBundle& bundle_;
    std::string locale_;
};

auto to_ms(std::chrono::system_clock::time_point t) -> std::int64_t {
    return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

}  // namespace

auto handle_turn(const Session& session, std::string_view utterance, const DialogueContext& context,
                 std::chrono::system_clock::time_point now) -> TurnResult {
    Turn turn(context, session.locale);
    Step step;
    try {
        step = std::visit(
            [&](const auto& st) -> Step {
                using S = std::decay_t<decltype(st)>;
                if constexpr (std::is_same_v<S, state::Idle>) {
                    return turn.idle(utterance);
                } else if constexpr (std::is_same_v<S, state::AwaitingSlot>) {
                    return turn.awaiting_slot(st, utterance);
                } else if constexpr (std::is_same_v<S, state::AwaitingGroupChoice>) {
                    return turn.awaiting_group(st, utterance);
                } else if constexpr (std::is_same_v<S, state::AwaitingPresentationChoice>) {
                    return turn.awaiting_presentation(st, utterance);
                } else {
                    return turn.awaiting_page(st, utterance);
                }
            },
            session.state);
    } catch (const std::exception&) {
        // Keep the session usable whatever went wrong below.
        step = {};
        step.answer.kind = AnswerKind::Error;
        step.answer.text = "Sorry, something went wrong. Please try again.";
        step.outcome = OutcomeKind::Miss;
    }

    TurnResult out;
    out.session = session;
    out.session.state = std::move(step.next);
    out.session.last_active = now;
    out.session.history.push_back({std::string(utterance), step.answer.kind});
    while (out.session.history.size() > context.config.history_limit) out.session.history.pop_front();

    out.record.timestamp_ms = to_ms(now);
    out.record.session_id = session.id;
    out.record.turn_index = session.turns;
    out.record.utterance = std::string(utterance);
    out.record.outcome = step.outcome;
    if (step.outcome == OutcomeKind::Hit) {
        out.record.intent = step.intent;
        out.record.confidence = step.confidence;
    }
    out.session.turns = session.turns + 1;
    out.answer = std::move(step.answer);
    out.answer.turn = session.turns;
    return out;
}

Conversation::Conversation(DialogueContext context, std::shared_ptr<InteractionLog> log, Clock clock)
    : context_(std::move(context)), log_(log ? std::move(log) : std::make_shared<InteractionLog>()), clock_(std::move(clock)) {}

auto Conversation::slot_for(const std::string& id, std::string_view locale) -> std::shared_ptr<Slot> {
    std::lock_guard lock(mutex_);
    auto& slot = sessions_[id];
    if (!slot) {
        slot = std::make_shared<Slot>();
        slot->session.id = id;
        slot->session.locale = locale.empty() ? "en" : std::string(locale);
        // Turn numbers continue across expiry so ratings stay unambiguous.
        slot->session.turns = log_->turns_of(id);
        slot->session.last_active = clock_();
    }
    return slot;
}

auto Conversation::chat(const std::string& session_id, std::string_view utterance, std::string_view locale) -> Answer {
    auto slot = slot_for(session_id, locale);
    std::lock_guard turn_lock(slot->turn);
    auto now = clock_();
    if (now - slot->session.last_active > context_.config.session_ttl) {
        slot->session.state = state::Idle{};
        slot->session.history.clear();
    }
    auto result = handle_turn(slot->session, utterance, context_, now);
    slot->session = std::move(result.session);
    log_->append(std::move(result.record));
    return std::move(result.answer);
}

auto Conversation::rate(const std::string& session_id, std::size_t turn_index, int rating) -> void {
    log_->rate(session_id, turn_index, rating,
               std::chrono::duration_cast<std::chrono::milliseconds>(clock_().time_since_epoch()).count());
}

auto Conversation::session(const std::string& session_id) const -> std::optional<Session> {
    std::shared_ptr<Slot> slot;
    {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(session_id);
        if (it == sessions_.end()) return std::nullopt;
        slot = it->second;
    }
    std::lock_guard turn_lock(slot->turn);
    return slot->session;
}

auto Conversation::expire() -> std::size_t {
    auto now = clock_();
    std::lock_guard lock(mutex_);
    std::size_t dropped = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        std::unique_lock turn_lock(it->second->turn, std::try_to_lock);
        if (turn_lock.owns_lock() && now - it->second->session.last_active > context_.config.session_ttl) {
            turn_lock.unlock();
            it = sessions_.erase(it);
            ++dropped;
        } else {
            ++it;
        }
    }
    return dropped;
}

}  // namespace tabot
