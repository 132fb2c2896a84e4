#include "sail/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "sail/matcher.hpp"

namespace sail {

namespace {

constexpr const char* kPreamble =
    "You are a mobile UI testing agent migrating a test case to a new app.";

std::string instruction_for(DecisionKind kind) {
    switch (kind) {
    case DecisionKind::conclude_goal:
        return "State the goal of the test in one sentence.";
    case DecisionKind::divide_skills:
        return "Split the test into skills. Answer one line per skill as: SKILL <name>: <lo>-<hi>";
    case DecisionKind::retrieve_skill:
        return "Pick the most relevant skill. Answer with exactly one number, or NONE if no "
               "skill applies.";
    case DecisionKind::select_event:
        return "Pick the event to perform next. Answer with exactly one number.";
    case DecisionKind::skill_finished:
        return "Has the current skill been completed? Answer YES or NO.";
    case DecisionKind::goal_finished:
        return "Has the test goal been reached? Answer YES or NO.";
    case DecisionKind::swipe_direction:
        return "Which way should the swipe go? Answer with one of: up, down, left, right.";
    case DecisionKind::input_text:
        return "What text should be typed? Answer with the text only, on one line.";
    }
    return "";
}

std::string numbered(const std::vector<std::string>& lines) {
    std::ostringstream os;
    for (size_t i = 0; i < lines.size(); ++i)
        os << (i + 1) << ". " << lines[i] << "\n";
    return os.str();
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Word and integer tokens of the raw reply, in order.
struct ReplyToken {
    bool is_number = false;
    long number = 0;
    std::string word;
};

std::vector<ReplyToken> reply_tokens(const std::string& raw) {
    std::vector<ReplyToken> out;
    size_t i = 0;
    while (i < raw.size()) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        if (std::isdigit(c)) {
            long v = 0;
            while (i < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i]))) {
                v = v * 10 + (raw[i] - '0');
                if (v > 1000000000L) v = 1000000000L;
                ++i;
            }
            out.push_back({true, v, ""});
        } else if (std::isalpha(c)) {
            std::string w;
            while (i < raw.size() && std::isalpha(static_cast<unsigned char>(raw[i])))
                w += static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i++])));
            out.push_back({false, 0, w});
        } else {
            ++i;
        }
    }
    return out;
}

Json reply_to_json(const DecisionReply& reply) {
    Json out = Json::object();
    switch (reply.kind) {
    case DecisionKind::conclude_goal:
    case DecisionKind::input_text:
        out["text"] = reply.text;
        break;
    case DecisionKind::divide_skills: {
        Json arr = Json::array();
        for (const auto& s : reply.skills) {
            Json sd = Json::object();
            sd["name"] = s.name;
            sd["description"] = s.description;
            sd["range"] = Json::array({s.lo, s.hi});
            arr.push_back(std::move(sd));
        }
        out["skills"] = std::move(arr);
        break;
    }
    case DecisionKind::retrieve_skill:
        if (reply.number) out["number"] = *reply.number;
        else out["number"] = nullptr;
        break;
    case DecisionKind::select_event:
        out["number"] = reply.number ? Json(*reply.number) : Json(nullptr);
        break;
    case DecisionKind::skill_finished:
    case DecisionKind::goal_finished:
        out["value"] = reply.decision;
        break;
    case DecisionKind::swipe_direction:
        out["direction"] = to_string(reply.direction);
        break;
    }
    return out;
}

DecisionReply reply_from_json(DecisionKind kind, const Json& doc) {
    DecisionReply reply;
    reply.kind = kind;
    switch (kind) {
    case DecisionKind::conclude_goal:
    case DecisionKind::input_text:
        reply.text = require_string(doc, "text", "reply");
        break;
    case DecisionKind::divide_skills: {
        const Json& arr = require_field(doc, "skills", "reply");
        for (const auto& sd : arr) {
            Skill s;
            s.name = require_string(sd, "name", "reply.skills");
            s.description = sd.contains("description") ? sd["description"].get<std::string>() : s.name;
            s.lo = sd["range"][0].get<size_t>();
            s.hi = sd["range"][1].get<size_t>();
            reply.skills.push_back(std::move(s));
        }
        break;
    }
    case DecisionKind::retrieve_skill:
    case DecisionKind::select_event: {
        const Json& n = require_field(doc, "number", "reply");
        if (!n.is_null()) reply.number = n.get<size_t>();
        break;
    }
    case DecisionKind::skill_finished:
    case DecisionKind::goal_finished:
        reply.decision = require_field(doc, "value", "reply").get<bool>();
        break;
    case DecisionKind::swipe_direction:
        reply.direction = direction_from_string(require_string(doc, "direction", "reply"));
        break;
    }
    return reply;
}

// Raw text a deterministic backend synthesizes for its reply; shaped so the
// normal parse grammar accepts it.
std::string reply_to_raw(const DecisionReply& reply) {
    switch (reply.kind) {
    case DecisionKind::conclude_goal:
    case DecisionKind::input_text:
        return reply.text;
    case DecisionKind::divide_skills: {
        std::ostringstream os;
        for (const auto& s : reply.skills)
            os << "SKILL " << s.name << ": " << s.lo << "-" << s.hi << "\n";
        return os.str();
    }
    case DecisionKind::retrieve_skill:
        return reply.number ? std::to_string(*reply.number) : "NONE";
    case DecisionKind::select_event:
        return reply.number ? std::to_string(*reply.number) : "";
    case DecisionKind::skill_finished:
    case DecisionKind::goal_finished:
        return reply.decision ? "YES" : "NO";
    case DecisionKind::swipe_direction:
        return to_string(reply.direction);
    }
    return "";
}

bool step_covered(const StepView& step, const std::vector<std::string>& history,
                  double theta_done) {
    for (const auto& h : history)
        if (overlap_score(h, step.description) >= theta_done) return true;
    return false;
}

std::optional<size_t> earliest_unfinished(const std::vector<StepView>& steps,
                                          const std::vector<std::string>& history,
                                          double theta_done) {
    for (size_t i = 0; i < steps.size(); ++i)
        if (!step_covered(steps[i], history, theta_done)) return i;
    return std::nullopt;
}

bool all_steps_covered(const std::vector<StepView>& steps,
                       const std::vector<std::string>& history, double theta_done,
                       bool ignore_back) {
    for (const auto& s : steps) {
        if (ignore_back && s.action == Action::back) continue;
        if (!step_covered(s, history, theta_done)) return false;
    }
    return true;
}

const StepView* first_unfinished_of_kind(const DecisionContext& ctx, Action action,
                                         double theta_done) {
    auto scan = [&](const std::vector<StepView>& steps) -> const StepView* {
        for (const auto& s : steps) {
            if (s.action != action) continue;
            if (!step_covered(s, ctx.history, theta_done)) return &s;
        }
        return nullptr;
    };
    if (ctx.current_skill) {
        if (const StepView* s = scan(ctx.current_skill->steps)) return s;
    }
    if (const StepView* s = scan(ctx.source_steps)) return s;
    // Fall back to the last step of the right kind even when covered.
    auto last = [&](const std::vector<StepView>& steps) -> const StepView* {
        const StepView* found = nullptr;
        for (const auto& s : steps)
            if (s.action == action) found = &s;
        return found;
    };
    if (ctx.current_skill) {
        if (const StepView* s = last(ctx.current_skill->steps)) return s;
    }
    return last(ctx.source_steps);
}

} // namespace

std::string to_string(DecisionKind k) {
    switch (k) {
    case DecisionKind::conclude_goal: return "conclude_goal";
    case DecisionKind::divide_skills: return "divide_skills";
    case DecisionKind::retrieve_skill: return "retrieve_skill";
    case DecisionKind::select_event: return "select_event";
    case DecisionKind::skill_finished: return "skill_finished";
    case DecisionKind::goal_finished: return "goal_finished";
    case DecisionKind::swipe_direction: return "swipe_direction";
    case DecisionKind::input_text: return "input_text";
    }
    return "select_event";
}

DecisionKind decision_kind_from_string(const std::string& s) {
    if (s == "conclude_goal") return DecisionKind::conclude_goal;
    if (s == "divide_skills") return DecisionKind::divide_skills;
    if (s == "retrieve_skill") return DecisionKind::retrieve_skill;
    if (s == "select_event") return DecisionKind::select_event;
    if (s == "skill_finished") return DecisionKind::skill_finished;
    if (s == "goal_finished") return DecisionKind::goal_finished;
    if (s == "swipe_direction") return DecisionKind::swipe_direction;
    if (s == "input_text") return DecisionKind::input_text;
    throw SchemaError("unknown decision kind '" + s + "'", "kind");
}

std::string render_event_list(const std::vector<std::string>& events) {
    return numbered(events);
}

std::string render_prompt(const DecisionRequest& req) {
    const DecisionContext& ctx = req.context;
    std::ostringstream os;
    os << kPreamble << "\n";
    if (ctx.goal) os << "Goal: " << *ctx.goal << "\n";

    if (!ctx.source_steps.empty()) {
        os << "Source test steps:\n";
        std::vector<std::string> lines;
        for (const auto& s : ctx.source_steps) lines.push_back(s.description);
        os << numbered(lines);
    }

    if (!ctx.skills.empty()) {
        os << "Remaining skills:\n";
        for (size_t i = 0; i < ctx.skills.size(); ++i) {
            const SkillView& sk = ctx.skills[i];
            os << (i + 1) << ". " << sk.name << ": " << sk.description << " [";
            for (size_t j = 0; j < sk.steps.size(); ++j) {
                if (j) os << "; ";
                os << sk.steps[j].description;
            }
            os << "]\n";
        }
    }

    if (ctx.current_skill) {
        os << "Current skill: " << ctx.current_skill->name << " ("
           << ctx.current_skill->description << ")\n";
        if (!ctx.current_skill->steps.empty()) {
            os << "Skill steps:\n";
            std::vector<std::string> lines;
            for (const auto& s : ctx.current_skill->steps) lines.push_back(s.description);
            os << numbered(lines);
        }
    }

    if (!ctx.activity.empty()) os << "Current activity: " << ctx.activity << "\n";

    if (!ctx.events.empty()) {
        os << "Available events:\n" << render_event_list(ctx.events);
    }

    if (!ctx.history.empty()) {
        size_t window = ctx.history_window > 0 ? static_cast<size_t>(ctx.history_window) : 10;
        size_t start = ctx.history.size() > window ? ctx.history.size() - window : 0;
        os << "Recent steps:\n";
        std::vector<std::string> lines(ctx.history.begin() + static_cast<long>(start),
                                       ctx.history.end());
        os << numbered(lines);
    }

    os << instruction_for(req.kind);
    return os.str();
}

DecisionReply parse_reply(DecisionKind kind, const std::string& raw) {
    DecisionReply reply;
    reply.kind = kind;
    switch (kind) {
    case DecisionKind::skill_finished:
    case DecisionKind::goal_finished: {
        for (const auto& tok : reply_tokens(raw)) {
            if (tok.is_number) continue;
            if (tok.word == "yes") {
                reply.decision = true;
                return reply;
            }
            if (tok.word == "no") {
                reply.decision = false;
                return reply;
            }
        }
        throw UnparseableReply("no YES/NO found in reply", raw);
    }
    case DecisionKind::select_event: {
        for (const auto& tok : reply_tokens(raw)) {
            if (tok.is_number) {
                reply.number = static_cast<size_t>(tok.number);
                return reply;
            }
        }
        throw UnparseableReply("no event number found in reply", raw);
    }
    case DecisionKind::retrieve_skill: {
        for (const auto& tok : reply_tokens(raw)) {
            if (!tok.is_number && tok.word == "none") {
                reply.number = std::nullopt;
                return reply;
            }
            if (tok.is_number) {
                reply.number = static_cast<size_t>(tok.number);
                return reply;
            }
        }
        throw UnparseableReply("no skill number or NONE found in reply", raw);
    }
    case DecisionKind::divide_skills: {
        static const std::regex line_re(R"(^\s*SKILL\s+(.+?)\s*:\s*(\d+)\s*-\s*(\d+)\s*$)",
                                        std::regex::icase);
        std::istringstream in(raw);
        std::string line;
        while (std::getline(in, line)) {
            std::smatch m;
            if (!std::regex_match(line, m, line_re)) continue;
            Skill s;
            s.name = m[1].str();
            s.description = s.name;
            s.lo = static_cast<size_t>(std::stoul(m[2].str()));
            s.hi = static_cast<size_t>(std::stoul(m[3].str()));
            reply.skills.push_back(std::move(s));
        }
        if (reply.skills.empty())
            throw UnparseableReply("no SKILL lines found in reply", raw);
        return reply;
    }
    case DecisionKind::swipe_direction: {
        for (const auto& tok : reply_tokens(raw)) {
            if (tok.is_number) continue;
            if (tok.word == "up") { reply.direction = SwipeDirection::up; return reply; }
            if (tok.word == "down") { reply.direction = SwipeDirection::down; return reply; }
            if (tok.word == "left") { reply.direction = SwipeDirection::left; return reply; }
            if (tok.word == "right") { reply.direction = SwipeDirection::right; return reply; }
        }
        throw UnparseableReply("no direction found in reply", raw);
    }
    case DecisionKind::conclude_goal:
    case DecisionKind::input_text: {
        std::string text = trim(raw);
        if (kind == DecisionKind::input_text) {
            size_t nl = text.find('\n');
            if (nl != std::string::npos) text = trim(text.substr(0, nl));
            if (text.size() >= 2 &&
                ((text.front() == '"' && text.back() == '"') ||
                 (text.front() == '\'' && text.back() == '\'')))
                text = text.substr(1, text.size() - 2);
        }
        if (text.empty()) throw UnparseableReply("empty text reply", raw);
        reply.text = text;
        return reply;
    }
    }
    throw UnparseableReply("unsupported reply kind", raw);
}

std::string transcript_to_jsonl(const Transcript& t) {
    std::ostringstream os;
    for (const auto& rec : t) {
        Json line = Json::object();
        line["kind"] = to_string(rec.kind);
        line["prompt"] = rec.prompt;
        line["raw"] = rec.raw;
        if (rec.reply) line["reply"] = reply_to_json(*rec.reply);
        line["latency_ms"] = rec.latency_ms;
        if (rec.tokens) {
            line["tokens"] =
                Json{{"prompt", rec.tokens->prompt_tokens}, {"completion", rec.tokens->completion_tokens}};
        }
        os << line.dump() << "\n";
    }
    return os.str();
}

Transcript transcript_from_jsonl(const std::string& text) {
    Transcript out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        Json doc;
        try {
            doc = parse_strict_json(trimmed);
        } catch (const SchemaError& e) {
            throw SchemaError(std::string("transcript line ") + std::to_string(lineno) + ": " +
                                  e.what(),
                              "line " + std::to_string(lineno));
        }
        TranscriptRecord rec;
        rec.kind = decision_kind_from_string(require_string(doc, "kind", "transcript"));
        if (doc.contains("prompt")) rec.prompt = doc["prompt"].get<std::string>();
        if (doc.contains("raw")) rec.raw = doc["raw"].get<std::string>();
        if (doc.contains("reply")) rec.reply = reply_from_json(rec.kind, doc["reply"]);
        if (doc.contains("latency_ms")) rec.latency_ms = doc["latency_ms"].get<long>();
        if (doc.contains("tokens")) {
            TokenUsage usage;
            usage.prompt_tokens = doc["tokens"].value("prompt", 0L);
            usage.completion_tokens = doc["tokens"].value("completion", 0L);
            rec.tokens = usage;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

DecisionReply ReasonerSession::decide(const DecisionRequest& req) {
    TranscriptRecord rec = backend_.decide(req);
    if (!rec.reply) throw UnparseableReply("backend produced no reply", rec.raw);
    const DecisionReply& reply = *rec.reply;
    if (reply.kind != req.kind)
        throw UnparseableReply("reply kind " + to_string(reply.kind) + " does not match request " +
                                   to_string(req.kind),
                               rec.raw);
    if (req.kind == DecisionKind::select_event) {
        if (!reply.number || *reply.number < 1 || *reply.number > req.context.events.size())
            throw UnparseableReply("event number out of range", rec.raw);
    }
    if (req.kind == DecisionKind::retrieve_skill && reply.number) {
        if (*reply.number < 1 || *reply.number > req.context.skills.size())
            throw UnparseableReply("skill number out of range", rec.raw);
    }
    transcript_.push_back(rec);
    return reply;
}

TranscriptRecord HeuristicReasoner::decide(const DecisionRequest& req) {
    const DecisionContext& ctx = req.context;
    DecisionReply reply;
    reply.kind = req.kind;

    switch (req.kind) {
    case DecisionKind::conclude_goal: {
        if (ctx.hint_goal) {
            reply.text = *ctx.hint_goal;
            break;
        }
        if (ctx.source_steps.empty())
            throw PreconditionError("conclude_goal needs source steps");
        std::string joined;
        for (size_t i = 0; i < ctx.source_steps.size(); ++i) {
            if (i) joined += "; ";
            joined += ctx.source_steps[i].description;
        }
        reply.text = joined;
        break;
    }
    case DecisionKind::divide_skills: {
        if (!ctx.hint_skills.empty()) {
            reply.skills = ctx.hint_skills;
            break;
        }
        if (ctx.source_steps.empty())
            throw PreconditionError("divide_skills needs source steps");
        for (size_t i = 0; i < ctx.source_steps.size(); ++i) {
            Skill s;
            s.name = "step " + std::to_string(i + 1);
            s.description = ctx.source_steps[i].description;
            s.lo = i;
            s.hi = i + 1;
            reply.skills.push_back(std::move(s));
        }
        break;
    }
    case DecisionKind::retrieve_skill: {
        // Back is available on every screen; it says nothing about which
        // skill applies here, so it does not count toward relevance.
        auto scoreable = [&](size_t i) {
            return i >= ctx.event_actions.size() || ctx.event_actions[i] != Action::back;
        };
        double best = -1.0;
        std::optional<size_t> best_index;
        for (size_t i = 0; i < ctx.skills.size(); ++i) {
            double skill_best = 0.0;
            for (const auto& step : ctx.skills[i].steps)
                for (size_t e = 0; e < ctx.events.size(); ++e)
                    if (scoreable(e))
                        skill_best = std::max(skill_best,
                                              overlap_score(ctx.events[e], step.description));
            if (skill_best > best) {
                best = skill_best;
                best_index = i;
            }
        }
        if (!best_index || best < cfg_.theta_skill) reply.number = std::nullopt;
        else reply.number = *best_index + 1;
        break;
    }
    case DecisionKind::select_event: {
        if (ctx.events.empty()) throw PreconditionError("select_event needs events");
        std::string anchor;
        if (ctx.current_skill) {
            auto idx = earliest_unfinished(ctx.current_skill->steps, ctx.history, cfg_.theta_done);
            if (idx) anchor = ctx.current_skill->steps[*idx].description;
            else if (!ctx.current_skill->steps.empty())
                anchor = ctx.current_skill->steps.back().description;
        } else if (!ctx.source_steps.empty()) {
            auto idx = earliest_unfinished(ctx.source_steps, ctx.history, cfg_.theta_done);
            if (idx) anchor = ctx.source_steps[*idx].description;
            else anchor = ctx.source_steps.back().description;
        } else if (ctx.goal) {
            anchor = *ctx.goal;
        }
        double best = -1.0;
        size_t best_index = 0;
        for (size_t i = 0; i < ctx.events.size(); ++i) {
            double score = anchor.empty() ? 0.0 : overlap_score(ctx.events[i], anchor);
            if (score > best) {
                best = score;
                best_index = i;
            }
        }
        reply.number = best_index + 1;
        break;
    }
    case DecisionKind::skill_finished: {
        if (!ctx.current_skill) throw PreconditionError("skill_finished needs a current skill");
        reply.decision =
            all_steps_covered(ctx.current_skill->steps, ctx.history, cfg_.theta_done, false);
        break;
    }
    case DecisionKind::goal_finished: {
        if (!ctx.skills.empty()) {
            bool all = true;
            for (const auto& sk : ctx.skills)
                if (!all_steps_covered(sk.steps, ctx.history, cfg_.theta_done, false)) {
                    all = false;
                    break;
                }
            reply.decision = all;
        } else if (!ctx.source_steps.empty()) {
            reply.decision = all_steps_covered(ctx.source_steps, ctx.history, cfg_.theta_done, true);
        } else {
            reply.decision = true;
        }
        break;
    }
    case DecisionKind::swipe_direction: {
        const StepView* step = first_unfinished_of_kind(ctx, Action::swipe, cfg_.theta_done);
        reply.direction = step && step->direction ? *step->direction : SwipeDirection::down;
        break;
    }
    case DecisionKind::input_text: {
        const StepView* step = first_unfinished_of_kind(ctx, Action::input, cfg_.theta_done);
        reply.text = step && step->value ? *step->value : "text";
        break;
    }
    }

    TranscriptRecord rec;
    rec.kind = req.kind;
    rec.prompt = render_prompt(req);
    rec.raw = reply_to_raw(reply);
    rec.reply = reply;
    rec.latency_ms = 0;
    return rec;
}

TranscriptRecord ReplayReasoner::decide(const DecisionRequest& req) {
    if (cursor_ >= records_.size())
        throw FixtureExhausted("replay transcript exhausted after " +
                               std::to_string(records_.size()) + " records");
    const TranscriptRecord& fixture = records_[cursor_];
    if (fixture.kind != req.kind)
        throw FixtureExhausted("replay transcript expected " + to_string(fixture.kind) +
                               " but the session asked for " + to_string(req.kind) +
                               " at record " + std::to_string(cursor_));
    ++cursor_;

    TranscriptRecord rec;
    rec.kind = req.kind;
    rec.prompt = render_prompt(req);
    rec.raw = fixture.raw;
    rec.latency_ms = 0;
    if (fixture.reply) rec.reply = fixture.reply;
    else rec.reply = parse_reply(req.kind, fixture.raw);
    return rec;
}

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig cfg;
    if (const char* url = std::getenv("SAIL_REASONER_URL")) cfg.base_url = url;
    if (const char* key = std::getenv("SAIL_REASONER_API_KEY")) cfg.api_key = key;
    if (const char* model = std::getenv("SAIL_REASONER_MODEL")) cfg.model = model;
    return cfg;
}

RemoteReasoner::Exchange RemoteReasoner::post_chat(const std::string& prompt) {
    if (cfg_.base_url.empty())
        throw BackendUnavailable("remote reasoner has no base URL (set SAIL_REASONER_URL)");

    Json body = Json::object();
    body["model"] = cfg_.model;
    body["temperature"] = 0;
    body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
    std::string payload = body.dump();

    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(30, 0);

        auto start = std::chrono::steady_clock::now();
        httplib::Result res = client.Post("/v1/chat/completions", headers, payload,
                                          "application/json");
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();

        if (!res) {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
        } else if (res->status != 200) {
            throw BackendUnavailable("remote reasoner returned status " +
                                     std::to_string(res->status));
        } else {
            Json doc;
            try {
                doc = Json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw BackendUnavailable(std::string("malformed response body: ") + e.what());
            }
            if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
                throw BackendUnavailable("response has no choices");
            const Json& msg = doc["choices"][0];
            if (!msg.contains("message") || !msg["message"].contains("content"))
                throw BackendUnavailable("response has no message content");
            Exchange ex;
            ex.raw = msg["message"]["content"].get<std::string>();
            ex.latency_ms = static_cast<long>(elapsed);
            if (doc.contains("usage")) {
                TokenUsage usage;
                usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
                usage.completion_tokens = doc["usage"].value("completion_tokens", 0L);
                ex.tokens = usage;
            }
            return ex;
        }

        if (attempt < cfg_.max_attempts && cfg_.retry_delay_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry_delay_ms * attempt));
    }
    throw BackendUnavailable("remote reasoner unavailable after " +
                             std::to_string(cfg_.max_attempts) + " attempts: " + last_error);
}

TranscriptRecord RemoteReasoner::decide(const DecisionRequest& req) {
    std::string prompt = render_prompt(req);
    Exchange first = post_chat(prompt);

    TranscriptRecord rec;
    rec.kind = req.kind;
    rec.prompt = prompt;
    rec.raw = first.raw;
    rec.latency_ms = first.latency_ms;
    rec.tokens = first.tokens;

    try {
        rec.reply = parse_reply(req.kind, first.raw);
        return rec;
    } catch (const UnparseableReply&) {
        // One reformat retry, then give up.
    }

    Exchange second = post_chat(prompt + "\nAnswer with the required format only.");
    rec.raw = second.raw;
    rec.latency_ms += second.latency_ms;
    if (second.tokens) {
        if (rec.tokens) {
            rec.tokens->prompt_tokens += second.tokens->prompt_tokens;
            rec.tokens->completion_tokens += second.tokens->completion_tokens;
        } else {
            rec.tokens = second.tokens;
        }
    }
    rec.reply = parse_reply(req.kind, second.raw); // throws UnparseableReply on failure
    return rec;
}

std::string FixtureVisionProvider::describe(const UiElement& element) {
    auto it = table_.find(element_hash(element));
    if (it == table_.end())
        throw ProviderUnavailable("no vision fixture for element hash " + element_hash(element));
    return it->second;
}

std::string DescriptionCache::get_or_compute(const std::string& key,
                                             const std::function<std::string()>& compute) {
    std::shared_future<std::string> fut;
    std::promise<std::string> promise;
    bool owner = false;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            fut = it->second;
        } else {
            fut = promise.get_future().share();
            entries_.emplace(key, fut);
            owner = true;
        }
    }
    if (owner) {
        try {
            promise.set_value(compute());
        } catch (...) {
            {
                std::lock_guard<std::mutex> lock(mutex_);
                entries_.erase(key);
            }
            promise.set_exception(std::current_exception());
        }
    }
    return fut.get();
}

size_t DescriptionCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

std::string describe_element_visual(const UiElement& element, VisionProvider& provider,
                                    DescriptionCache& cache) {
    if (element.text || element.content_desc)
        throw PreconditionError("element already carries a description");
    return cache.get_or_compute(element_hash(element),
                                [&] { return provider.describe(element); });
}

namespace {

void enrich_element(UiElement& e, VisionProvider& provider, DescriptionCache& cache) {
    if (e.interactable() && !e.text && !e.content_desc && aggregated_text(e).empty())
        e.vision_desc = describe_element_visual(e, provider, cache);
    for (auto& child : e.children) enrich_element(child, provider, cache);
}

} // namespace

UiScreen enrich_screen(const UiScreen& screen, VisionProvider& provider,
                       DescriptionCache& cache) {
    UiScreen out = screen;
    enrich_element(out.root, provider, cache);
    return out;
}

} // namespace sail
