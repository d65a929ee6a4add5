#include "strata/service.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "strata/corpus.hpp"
#include "strata/error.hpp"
#include "strata/text.hpp"

namespace strata {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- sources

SourceSpec SourceSpec::from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        SourceSpec s;
        auto type = j.at("type").get<std::string>();
        if (type == "replay") {
            s.kind = Kind::Replay;
            s.path = j.at("path").get<std::string>();
            s.realtime = j.value("realtime", false);
            s.rate_hz = j.value("rate_hz", kNominalRateHz);
        } else if (type == "synth") {
            s.kind = Kind::Synth;
            s.profiles = j.value("profiles", std::string{});
            s.seconds = j.value("seconds", 60.0);
            s.seed = j.value("seed", std::uint64_t{0});
            s.script = j.value("script", true);
        } else if (type == "live") {
            s.kind = Kind::Live;
            s.address = j.at("address").get<std::string>();
        } else {
            throw ArgumentError("unknown source type '" + type + "'");
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("source spec: ") + e.what());
    }
}

std::unique_ptr<FrameSource> open_source(const SourceSpec& spec) {
    switch (spec.kind) {
        case SourceSpec::Kind::Replay:
            if (!std::filesystem::is_regular_file(spec.path))
                throw IoError("replay file " + spec.path.string() + " does not exist");
            return std::make_unique<CsvReplay>(spec.path, spec.rate_hz, spec.realtime);
        case SourceSpec::Kind::Synth: {
            auto set = spec.profiles.empty() ? starter_profiles() : load_profiles(spec.profiles);
            if (!(spec.seconds > 0.0)) throw ArgumentError("synthetic source needs a positive duration");
            std::vector<SynthSegment> segs;
            if (spec.script && !set.script.empty())
                segs = script_segments(set, set.script, spec.seconds, spec.seed);
            else
                segs = corpus_segments(set, spec.seconds / static_cast<double>(set.patterns.size()));
            return std::make_unique<SynthStream>(std::move(segs), spec.seed, set.rate_hz);
        }
        case SourceSpec::Kind::Live:
            return std::make_unique<LiveSocketSource>(spec.address);
    }
    throw ArgumentError("unknown source kind");
}

// ---------------------------------------------------------------- wire format

Command parse_command(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed message: ") + e.what());
    }
    if (!j.is_object() || j.value("kind", std::string{}) != "command")
        throw FormatError("expected a command message");
    try {
        Command c;
        c.cid = j.at("cid").get<std::string>();
        c.op = j.at("op").get<std::string>();
        c.name = j.value("name", std::string{});
        c.activity = j.value("activity", std::string{});
        if (j.contains("session")) c.session = j.at("session").get<std::string>();
        if (j.contains("source")) c.source = SourceSpec::from_json(j.at("source").dump());
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("command: ") + e.what());
    }
}

std::string unit_event_json(const UnitPatternEvent& e, std::uint64_t seq) {
    ojson j = {{"kind", "unit_event"}, {"seq", seq}, {"t_ms", e.t_ms}, {"raw", e.raw_label}};
    j["voted"] = e.voted_label ? ojson(*e.voted_label) : ojson(nullptr);
    j["conf"] = e.confidence;
    return j.dump();
}

std::string activity_event_json(const ActivityEvent& e, std::uint64_t seq) {
    ojson j = {{"kind", "activity_event"}, {"seq", seq},      {"t0_ms", e.t0_ms},
               {"t1_ms", e.t1_ms},         {"label", e.label}, {"conf", e.confidence}};
    return j.dump();
}

std::string novelty_prompt_json(const std::string& candidate_id, std::uint64_t seq) {
    ojson j = {{"kind", "novelty_prompt"}, {"seq", seq}, {"candidate_id", candidate_id}};
    return j.dump();
}

std::string progress_json(std::size_t collected, std::size_t target, std::uint64_t seq) {
    ojson j = {{"kind", "progress"}, {"seq", seq}, {"collected", collected}, {"target", target}};
    return j.dump();
}

std::string ack_json(const std::string& cid, const std::optional<std::string>& session,
                     std::optional<std::uint64_t> seq) {
    ojson j = {{"kind", "command_ack"}};
    if (seq) j["seq"] = *seq;
    j["cid"] = cid;
    j["ok"] = true;
    if (session) j["session"] = *session;
    return j.dump();
}

std::string error_json(const std::string& code, const std::string& message, const std::optional<std::string>& cid,
                       std::optional<std::uint64_t> seq) {
    ojson j = {{"kind", "error"}};
    if (seq) j["seq"] = *seq;
    if (cid) j["cid"] = *cid;
    j["code"] = code;
    j["message"] = message;
    return j.dump();
}

std::string error_code(const std::exception& e) {
    if (dynamic_cast<const StateError*>(&e)) return "state";
    if (dynamic_cast<const ConflictError*>(&e)) return "conflict";
    if (dynamic_cast<const ArgumentError*>(&e)) return "argument";
    if (dynamic_cast<const FormatError*>(&e)) return "format";
    if (dynamic_cast<const CompatibilityError*>(&e)) return "compatibility";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    if (dynamic_cast<const DataError*>(&e)) return "data";
    if (dynamic_cast<const TrainingError*>(&e)) return "training";
    return "internal";
}

namespace {

std::string frame_json(const ImuFrame& f, std::uint64_t seq) {
    ojson j = {{"kind", "frame"}, {"seq", seq}, {"t_ms", f.t_ms}, {"acc", f.acc}, {"gyro", f.gyro}, {"orient", f.orient}};
    return j.dump();
}

}  // namespace

OfflineRun run_offline(FrameSource& source, std::shared_ptr<const ModelSnapshot> snapshot, RecognizerConfig cfg,
                       const std::function<void(const std::string&)>& emit) {
    if (!snapshot) throw StateError("no model snapshot loaded");
    cfg.auto_ignore_candidates = true;
    UnitPipeline unit(snapshot, cfg);
    std::optional<ActivityPipeline> activity;
    if (snapshot->activity_forest) activity.emplace(snapshot);
    OfflineRun out;
    std::uint64_t seq = 0;
    std::size_t candidates = 0;
    while (auto frame = source.next()) {
        auto r = unit.push(*frame);
        if (!r) continue;
        if (emit) emit(unit_event_json(r->event, ++seq));
        if (r->novelty && r->novelty->kind == NoveltyEventKind::NoveltyDetected) {
            ++out.novelty_prompts;
            if (emit) emit(novelty_prompt_json("c" + std::to_string(++candidates), ++seq));
        }
        if (activity)
            if (auto a = activity->push(r->event)) {
                if (emit) emit(activity_event_json(*a, ++seq));
                out.activities.push_back(*a);
            }
        out.units.push_back(std::move(r->event));
    }
    return out;
}

// ---------------------------------------------------------------- subscriber

bool Subscriber::offer(std::string line) {
    std::lock_guard lock(mu_);
    if (closed_) return false;
    if (queue_.size() >= capacity_) {
        queue_.push_back(error_json("overflow", "subscriber queue overflowed; disconnecting", std::nullopt));
        overflowed_ = true;
        closed_ = true;
        cv_.notify_all();
        return false;
    }
    queue_.push_back(std::move(line));
    cv_.notify_all();
    return true;
}

void Subscriber::offer_local(std::string line) {
    std::lock_guard lock(mu_);
    if (closed_) return;
    queue_.push_back(std::move(line));
    cv_.notify_all();
}

std::optional<std::string> Subscriber::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto line = std::move(queue_.front());
    queue_.pop_front();
    if (queue_.empty()) cv_.notify_all();
    return line;
}

std::vector<std::string> Subscriber::drain() {
    std::lock_guard lock(mu_);
    std::vector<std::string> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
    queue_.clear();
    cv_.notify_all();
    return out;
}

void Subscriber::close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
}

bool Subscriber::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

bool Subscriber::overflowed() const {
    std::lock_guard lock(mu_);
    return overflowed_;
}

bool Subscriber::wait_closed(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return closed_; });
}

const char* to_string(RunState s) {
    switch (s) {
        case RunState::Running: return "running";
        case RunState::Paused: return "paused";
        case RunState::Stopped: return "stopped";
        case RunState::Finished: return "finished";
    }
    return "?";
}

// ---------------------------------------------------------------- session

class Session {
public:
    Session(Engine& engine, std::string id, std::unique_ptr<FrameSource> source,
            std::shared_ptr<const ModelSnapshot> snapshot)
        : engine_(engine),
          id_(std::move(id)),
          source_(std::move(source)),
          snap_(snapshot),
          unit_(snapshot, engine.config().recognizer) {
        if (snap_->activity_forest) activity_.emplace(snap_);
        const double rate = engine.config().max_frame_rate_hz;
        frame_interval_ms_ = rate > 0 ? static_cast<std::int64_t>(std::llround(1000.0 / rate)) : 0;
    }

    ~Session() {
        join();
        if (retrain_thread_.joinable()) retrain_thread_.join();
    }

    const std::string& id() const noexcept { return id_; }

    void attach(std::shared_ptr<Subscriber> sub, bool late) {
        std::lock_guard lock(pub_mu_);
        if (finished_) {
            sub->offer(session_end_json());
            sub->close();
            return;
        }
        if (late) sub->offer(registry_update_json(seq_, true));
        subs_.push_back(std::move(sub));
    }

    void start() { thread_ = std::thread([this] { run(); }); }

    void submit(Command cmd) {
        std::lock_guard lock(mu_);
        if (state_ == RunState::Stopped || state_ == RunState::Finished)
            throw StateError("session " + id_ + " has ended");
        commands_.push_back(std::move(cmd));
        cv_.notify_all();
    }

    void request_stop() {
        std::lock_guard lock(mu_);
        if (state_ == RunState::Running || state_ == RunState::Paused) {
            state_ = RunState::Stopped;
            end_reason_ = "stopped";
        }
        cv_.notify_all();
    }

    void join() {
        if (thread_.joinable()) thread_.join();
    }

    RunState state() const {
        std::lock_guard lock(mu_);
        return state_;
    }

private:
    void run() {
        try {
            loop();
        } catch (const std::exception& e) {
            publish_line([&](std::uint64_t seq) { return error_json(error_code(e), e.what(), std::nullopt, seq); });
            std::lock_guard lock(mu_);
            end_reason_ = "error";
        }
        if (retrain_thread_.joinable()) retrain_thread_.join();
        std::deque<Command> leftover;
        {
            std::lock_guard lock(mu_);
            if (state_ != RunState::Stopped) state_ = RunState::Finished;
            leftover.swap(commands_);
        }
        for (const auto& c : leftover)
            publish_line([&](std::uint64_t seq) {
                return error_json("state", "session " + id_ + " has ended", c.cid, seq);
            });
        std::lock_guard lock(pub_mu_);
        ++seq_;
        auto end = session_end_json();
        for (auto& s : subs_) {
            s->offer(end);
            s->close();
        }
        subs_.clear();
        finished_ = true;
    }

    void loop() {
        for (;;) {
            process_commands();
            {
                std::unique_lock lock(mu_);
                if (state_ == RunState::Stopped) return;
                if (state_ == RunState::Paused) {
                    cv_.wait_for(lock, std::chrono::milliseconds(20));
                    continue;
                }
            }
            auto frame = source_->next();
            if (!frame) {
                std::lock_guard lock(mu_);
                end_reason_ = "source_exhausted";
                return;
            }
            if (frame_interval_ms_ == 0 || !last_frame_t_ || frame->t_ms - *last_frame_t_ >= frame_interval_ms_) {
                last_frame_t_ = frame->t_ms;
                publish_line([&](std::uint64_t seq) { return frame_json(*frame, seq); });
            }
            refresh_snapshot();
            if (auto r = unit_.push(*frame)) on_window(*r);
        }
    }

    void refresh_snapshot() {
        auto current = engine_.snapshot();
        if (!current || current == snap_) return;
        swap_in(std::move(current));
    }

    void swap_in(std::shared_ptr<const ModelSnapshot> s) {
        snap_ = s;
        unit_.recognizer().set_snapshot(s);
        if (s->activity_forest) {
            if (activity_)
                activity_->set_snapshot(s);
            else
                activity_.emplace(s);
        } else {
            activity_.reset();
        }
    }

    void on_window(const WindowResult& r) {
        unit_mode_ = r.mode;
        publish_line([&](std::uint64_t seq) { return unit_event_json(r.event, seq); });
        if (r.novelty) {
            const auto& ev = *r.novelty;
            switch (ev.kind) {
                case NoveltyEventKind::NoveltyDetected: {
                    auto cid = id_ + "-c" + std::to_string(++candidates_);
                    publish_line([&](std::uint64_t seq) { return novelty_prompt_json(cid, seq); });
                    break;
                }
                case NoveltyEventKind::CollectionProgress:
                    publish_line([&](std::uint64_t seq) { return progress_json(ev.progress, ev.target, seq); });
                    break;
                case NoveltyEventKind::CollectionComplete:
                    publish_line([&](std::uint64_t seq) { return progress_json(ev.progress, ev.target, seq); });
                    try {
                        engine_.add_pattern(ev.pattern_name.value_or(""), ev.activity_name.value_or(""),
                                            ev.buffered, ev.target);
                        publish_line([&](std::uint64_t seq) { return registry_update_json(seq, false); });
                    } catch (const std::exception& e) {
                        publish_line(
                            [&](std::uint64_t seq) { return error_json(error_code(e), e.what(), std::nullopt, seq); });
                    }
                    break;
                case NoveltyEventKind::CollectionCancelled:
                    break;
            }
        }
        if (activity_ && r.event.voted_label) {
            if (auto a = activity_->push(r.event)) {
                engine_.record_activity(*a);
                publish_line([&](std::uint64_t seq) { return activity_event_json(*a, seq); });
            }
        }
    }

    void process_commands() {
        std::deque<Command> batch;
        {
            std::lock_guard lock(mu_);
            batch.swap(commands_);
        }
        for (auto& c : batch) {
            try {
                apply(c);
                unit_mode_ = unit_.recognizer().novelty_state().mode;
                publish_line([&](std::uint64_t seq) { return ack_json(c.cid, std::nullopt, seq); });
            } catch (const std::exception& e) {
                publish_line([&](std::uint64_t seq) { return error_json(error_code(e), e.what(), c.cid, seq); });
            }
        }
    }

    void apply(const Command& c) {
        auto& rec = unit_.recognizer();
        if (c.op == "save_pattern") {
            if (c.name.empty() || c.activity.empty())
                throw ArgumentError("save_pattern needs a pattern name and an activity name");
            if (rec.novelty_state().mode != NoveltyMode::CandidatePending)
                throw StateError(std::string("no candidate pending (mode ") + to_string(rec.novelty_state().mode) +
                                 ")");
            if (engine_.has_pattern(c.name)) throw ConflictError("pattern '" + c.name + "' already exists");
            rec.resolve_candidate(SaveDecision{c.name, c.activity});
        } else if (c.op == "ignore_pattern") {
            rec.resolve_candidate(IgnoreDecision{});
        } else if (c.op == "not_of_interest") {
            rec.resolve_candidate(NotOfInterestDecision{});
        } else if (c.op == "cancel_collection") {
            rec.cancel_collection();
        } else if (c.op == "retrain") {
            if (retraining_) throw StateError("a retrain is already running");
            if (retrain_thread_.joinable()) retrain_thread_.join();
            retraining_ = true;
            retrain_thread_ = std::thread([this] { run_retrain(); });
        } else if (c.op == "pause" || c.op == "resume" || c.op == "stop") {
            std::lock_guard lock(mu_);
            if (c.op == "pause") {
                if (state_ != RunState::Running)
                    throw StateError(std::string("cannot pause (state ") + to_string(state_) + ")");
                state_ = RunState::Paused;
            } else if (c.op == "resume") {
                if (state_ != RunState::Paused)
                    throw StateError(std::string("cannot resume (state ") + to_string(state_) + ")");
                state_ = RunState::Running;
            } else {
                state_ = RunState::Stopped;
                end_reason_ = "stopped";
            }
        } else {
            throw ArgumentError("unknown command op '" + c.op + "'");
        }
    }

    // Worker thread: the pipeline picks the new snapshot up at its next window.
    void run_retrain() {
        try {
            auto previous = engine_.snapshot();
            engine_.install(retrain(engine_.registry(), engine_.config().train, previous.get()));
            publish_line([&](std::uint64_t seq) { return registry_update_json(seq, false); });
        } catch (const std::exception& e) {
            publish_line([&](std::uint64_t seq) { return error_json(error_code(e), e.what(), std::nullopt, seq); });
        }
        retraining_ = false;
    }

    std::string registry_update_json(std::uint64_t seq, bool with_state) const {
        auto reg = engine_.registry();
        auto snap = engine_.snapshot();
        ojson pats = ojson::array();
        for (const auto& p : reg.patterns())
            pats.push_back({{"name", p.name}, {"activities", p.activities}, {"sample_count", p.sample_count}});
        ojson j = {{"kind", "registry_update"},
                   {"seq", seq},
                   {"version", reg.version()},
                   {"snapshot_version", snap ? snap->version : 0},
                   {"patterns", pats},
                   {"activities", reg.activities()}};
        if (with_state) {
            RunState st;
            {
                std::lock_guard lock(mu_);
                st = state_;
            }
            j["state"] = {{"session", id_},
                          {"run", to_string(st)},
                          {"mode", to_string(unit_mode_.load())}};
        }
        return j.dump();
    }

    std::string session_end_json() const {
        ojson j = {{"kind", "session_end"}, {"seq", seq_}, {"session", id_}, {"reason", end_reason_}};
        return j.dump();
    }

    template <class F>
    void publish_line(F&& make) {
        std::lock_guard lock(pub_mu_);
        auto line = make(++seq_);
        std::erase_if(subs_, [&](const std::shared_ptr<Subscriber>& s) { return !s->offer(line); });
    }

    Engine& engine_;
    std::string id_;
    std::unique_ptr<FrameSource> source_;
    std::shared_ptr<const ModelSnapshot> snap_;
    UnitPipeline unit_;
    std::optional<ActivityPipeline> activity_;
    std::atomic<NoveltyMode> unit_mode_{NoveltyMode::Uncertain};

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Command> commands_;
    RunState state_ = RunState::Running;
    std::string end_reason_ = "source_exhausted";

    std::mutex pub_mu_;
    std::vector<std::shared_ptr<Subscriber>> subs_;
    std::uint64_t seq_ = 0;
    bool finished_ = false;

    std::thread thread_;
    std::thread retrain_thread_;
    std::atomic<bool> retraining_{false};
    std::optional<std::int64_t> last_frame_t_;
    std::int64_t frame_interval_ms_ = 0;
    std::size_t candidates_ = 0;
};

// ---------------------------------------------------------------- engine

Engine::Engine(PatternRegistry registry, std::shared_ptr<const ModelSnapshot> snapshot, EngineConfig cfg)
    : cfg_(std::move(cfg)), registry_(std::move(registry)), snapshot_(std::move(snapshot)) {}

Engine::~Engine() { stop_all(); }

std::string Engine::start_session(const SourceSpec& source, std::shared_ptr<Subscriber> first,
                                  const std::function<void(const std::string&)>& before_start) {
    if (!snapshot()) throw StateError("no model snapshot loaded");
    return start_session(open_source(source), std::move(first), before_start);
}

std::string Engine::start_session(std::unique_ptr<FrameSource> source, std::shared_ptr<Subscriber> first,
                                  const std::function<void(const std::string&)>& before_start) {
    auto snap = snapshot();
    if (!snap) throw StateError("no model snapshot loaded");
    if (!source) throw ArgumentError("session needs a frame source");
    std::shared_ptr<Session> session;
    {
        std::lock_guard lock(mu_);
        auto id = "s" + std::to_string(next_session_++);
        session = std::make_shared<Session>(*this, id, std::move(source), snap);
        sessions_[id] = session;
    }
    if (first) session->attach(std::move(first), false);
    if (before_start) before_start(session->id());
    session->start();
    return session->id();
}

std::shared_ptr<Session> Engine::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ArgumentError("unknown session '" + id + "'");
    return it->second;
}

void Engine::subscribe(const std::string& session_id, std::shared_ptr<Subscriber> sub) {
    find(session_id)->attach(std::move(sub), true);
}

std::shared_ptr<Subscriber> Engine::subscribe(const std::string& session_id) {
    auto sub = std::make_shared<Subscriber>();
    subscribe(session_id, sub);
    return sub;
}

void Engine::submit(const std::string& session_id, Command cmd) { find(session_id)->submit(std::move(cmd)); }

void Engine::wait(const std::string& session_id) { find(session_id)->join(); }

std::optional<RunState> Engine::state(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second->state();
}

void Engine::stop_all() {
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mu_);
        for (auto& [id, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all) s->request_stop();
    for (auto& s : all) s->join();
}

std::shared_ptr<const ModelSnapshot> Engine::snapshot() const {
    std::lock_guard lock(mu_);
    return snapshot_;
}

PatternRegistry Engine::registry() const {
    std::lock_guard lock(mu_);
    return registry_;
}

std::vector<TimelineEntry> Engine::timeline() const {
    std::lock_guard lock(mu_);
    return timeline_.entries();
}

void Engine::record_activity(const ActivityEvent& event) {
    std::lock_guard lock(mu_);
    timeline_.record(event);
}

bool Engine::has_pattern(const std::string& name) const {
    std::lock_guard lock(mu_);
    return registry_.contains(name);
}

std::shared_ptr<const ModelSnapshot> Engine::install(ModelSnapshot snap) {
    auto ptr = std::make_shared<const ModelSnapshot>(std::move(snap));
    std::lock_guard lock(mu_);
    if (cfg_.snapshot_path) save_snapshot(*ptr, *cfg_.snapshot_path);
    snapshot_ = ptr;
    return ptr;
}

std::uint64_t Engine::add_pattern(const std::string& name, const std::string& activity,
                                  std::vector<FeatureVector> samples, std::size_t expected) {
    std::lock_guard lock(mu_);
    auto next = registry_;
    next.add_pattern(name, activity, std::move(samples), expected);
    if (cfg_.dataset_path) save_dataset(next, *cfg_.dataset_path);
    registry_ = std::move(next);
    return registry_.version();
}

// ---------------------------------------------------------------- server

Server::Server(Engine& engine, const Endpoint& endpoint) : engine_(engine), listener_(endpoint) {}

Server::~Server() {
    stop();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        workers.swap(workers_);
    }
    for (auto& w : workers)
        if (w.joinable()) w.join();
}

void Server::run() {
    while (auto stream = listener_.accept()) {
        std::lock_guard lock(mu_);
        if (stopping_) break;
        workers_.emplace_back([this, s = std::move(*stream)]() mutable { serve(std::move(s)); });
    }
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        workers.swap(workers_);
    }
    for (auto& w : workers)
        if (w.joinable()) w.join();
}

void Server::stop() {
    std::lock_guard lock(mu_);
    stopping_ = true;
    listener_.close();
    for (auto& weak : live_)
        if (auto s = weak.lock()) s->shutdown();
}

void Server::serve(TcpStream stream) {
    auto conn = std::make_shared<TcpStream>(std::move(stream));
    {
        std::lock_guard lock(mu_);
        if (stopping_) return;
        live_.push_back(conn);
    }
    auto sub = std::make_shared<Subscriber>();
    std::thread writer([conn, sub] {
        for (;;) {
            auto line = sub->pop(std::chrono::milliseconds(100));
            if (line) {
                if (!conn->write_all(*line + "\n")) {
                    sub->close();
                    break;
                }
            } else if (sub->closed()) {
                break;
            }
        }
        conn->shutdown();
    });

    std::optional<std::string> session;
    while (auto line = conn->read_line()) {
        if (trim(*line).empty()) continue;
        Command cmd;
        try {
            cmd = parse_command(*line);
        } catch (const std::exception& e) {
            sub->offer_local(error_json(error_code(e), e.what(), std::nullopt));
            continue;
        }
        try {
            if (cmd.op == "start_session") {
                if (session) throw StateError("connection already follows session " + *session);
                if (!cmd.source) throw ArgumentError("start_session needs a source");
                session = engine_.start_session(*cmd.source, sub, [&](const std::string& id) {
                    sub->offer_local(ack_json(cmd.cid, id));
                });
            } else if (cmd.op == "subscribe") {
                if (session) throw StateError("connection already follows session " + *session);
                if (!cmd.session) throw ArgumentError("subscribe needs a session id");
                if (!engine_.state(*cmd.session)) throw ArgumentError("unknown session '" + *cmd.session + "'");
                sub->offer_local(ack_json(cmd.cid, *cmd.session));
                session = *cmd.session;
                engine_.subscribe(*session, sub);
            } else {
                auto target = cmd.session ? cmd.session : session;
                if (!target) throw StateError("no session; send start_session or subscribe first");
                engine_.submit(*target, cmd);
            }
        } catch (const std::exception& e) {
            sub->offer_local(error_json(error_code(e), e.what(), cmd.cid));
        }
    }
    sub->close();
    writer.join();
}

}  // namespace strata
