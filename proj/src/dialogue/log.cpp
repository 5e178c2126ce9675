#include <string>

#include "tabot/dialogue.hpp"
#include "tabot/error.hpp"

namespace tabot {

using nlohmann::json;

auto outcome_kind_name(OutcomeKind k) -> std::string_view {
    switch (k) {
        case OutcomeKind::Hit: return "Hit";
        case OutcomeKind::Miss: return "Miss";
        case OutcomeKind::Fallback: return "Fallback";
    }
    return "Miss";
}

auto record_to_json(const InteractionRecord& r) -> json {
    json j{{"type", "turn"},
           {"timestamp", r.timestamp_ms},
           {"sessionId", r.session_id},
           {"turn", r.turn_index},
           {"utterance", r.utterance},
           {"outcome", outcome_kind_name(r.outcome)}};
    j["intent"] = r.intent ? json(*r.intent) : json();
    j["confidence"] = r.confidence ? json(*r.confidence) : json();
    j["rating"] = r.rating ? json(*r.rating) : json();
    if (!r.rating_timestamps_ms.empty()) j["ratingTimestamps"] = r.rating_timestamps_ms;
    return j;
}

namespace {

auto outcome_from(std::string_view s) -> OutcomeKind {
    if (s == "Hit") return OutcomeKind::Hit;
    if (s == "Fallback") return OutcomeKind::Fallback;
    return OutcomeKind::Miss;
}

}  // namespace

InteractionLog::InteractionLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    {
        std::ifstream in(*path_);
        std::string line;
        while (std::getline(in, line)) {
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) continue;  // a torn last line from a crash
            if (j.value("type", "") == "turn") {
                InteractionRecord r;
                r.timestamp_ms = j.value("timestamp", std::int64_t{0});
                r.session_id = j.value("sessionId", "");
                r.turn_index = j.value("turn", std::size_t{0});
                r.utterance = j.value("utterance", "");
                r.outcome = outcome_from(j.value("outcome", "Miss"));
                if (j.contains("intent") && j["intent"].is_string()) r.intent = j["intent"].get<std::string>();
                if (j.contains("confidence") && j["confidence"].is_number()) {
                    r.confidence = j["confidence"].get<double>();
                }
                index_[{r.session_id, r.turn_index}] = records_.size();
                records_.push_back(std::move(r));
            } else if (j.value("type", "") == "rating") {
                auto it = index_.find({j.value("sessionId", ""), j.value("turn", std::size_t{0})});
                if (it == index_.end()) continue;
                auto& r = records_[it->second];
                r.rating = j.value("rating", 0);
                r.rating_timestamps_ms.push_back(j.value("timestamp", std::int64_t{0}));
            }
        }
    }
    out_.open(*path_, std::ios::app);
    if (!out_) throw Error(ErrorCode::Io, "cannot open interaction log " + path_->string(), path_->string());
}

auto InteractionLog::write_line(const json& j) -> void {
    if (!path_) return;
    out_ << j.dump() << '\n';
    out_.flush();
}

auto InteractionLog::append(InteractionRecord record) -> void {
    std::lock_guard lock(mutex_);
    write_line(record_to_json(record));
    index_[{record.session_id, record.turn_index}] = records_.size();
    records_.push_back(std::move(record));
}

auto InteractionLog::rate(const std::string& session_id, std::size_t turn_index, int rating, std::int64_t timestamp_ms)
    -> void {
    std::lock_guard lock(mutex_);
    auto it = index_.find({session_id, turn_index});
    if (it == index_.end()) {
        throw Error(ErrorCode::UnknownTurn,
                    "no turn " + std::to_string(turn_index) + " in session " + session_id, session_id);
    }
    auto& r = records_[it->second];
    r.rating = rating;
    r.rating_timestamps_ms.push_back(timestamp_ms);
    write_line({{"type", "rating"},
                {"timestamp", timestamp_ms},
                {"sessionId", session_id},
                {"turn", turn_index},
                {"rating", rating}});
}

auto InteractionLog::records() const -> std::vector<InteractionRecord> {
    std::lock_guard lock(mutex_);
    return records_;
}

auto InteractionLog::size() const -> std::size_t {
    std::lock_guard lock(mutex_);
    return records_.size();
}

auto InteractionLog::turns_of(const std::string& session_id) const -> std::size_t {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& r : records_) n += r.session_id == session_id ? 1 : 0;
    return n;
}

}  // namespace tabot
