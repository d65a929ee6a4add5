#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "strata/activity.hpp"
#include "strata/net.hpp"
#include "strata/recognizer.hpp"
#include "strata/registry.hpp"

namespace strata {

inline constexpr std::size_t kSubscriberQueueCapacity = 1024;

/// Where a session's frames come from.
struct SourceSpec {
    enum class Kind { Replay, Synth, Live };
    Kind kind = Kind::Replay;
    // replay
    std::filesystem::path path;
    bool realtime = false;
    double rate_hz = kNominalRateHz;
    // synth: profile file (starter set when empty), duration and seed
    std::filesystem::path profiles;
    double seconds = 60.0;
    std::uint64_t seed = 0;
    bool script = true;
    // live
    std::string address;

    /// {"type":"replay","path":..} | {"type":"synth",..} | {"type":"live","address":..}
    static SourceSpec from_json(std::string_view text);
};

/// Opens and validates a source; throws before producing any frame.
std::unique_ptr<FrameSource> open_source(const SourceSpec& spec);

/// One operator command. Session-scoped ops target `session` (or the
/// connection's session on the wire).
struct Command {
    std::string cid;
    std::string op;
    std::string name;
    std::string activity;
    std::optional<std::string> session;
    std::optional<SourceSpec> source;
};

/// Parses {"kind":"command","cid":..,"op":..,...}; FormatError when malformed.
Command parse_command(std::string_view line);

// Wire encodings (one JSON object, no trailing newline).
std::string unit_event_json(const UnitPatternEvent& e, std::uint64_t seq);
std::string activity_event_json(const ActivityEvent& e, std::uint64_t seq);
std::string novelty_prompt_json(const std::string& candidate_id, std::uint64_t seq);
std::string progress_json(std::size_t collected, std::size_t target, std::uint64_t seq);
std::string ack_json(const std::string& cid, const std::optional<std::string>& session = std::nullopt,
                     std::optional<std::uint64_t> seq = std::nullopt);
/// `code`: state, argument, conflict, format, source, training, overflow, internal.
std::string error_json(const std::string& code, const std::string& message, const std::optional<std::string>& cid,
                       std::optional<std::uint64_t> seq = std::nullopt);
/// Maps an exception to its error code.
std::string error_code(const std::exception& e);

struct OfflineRun {
    std::vector<UnitPatternEvent> units;
    std::vector<ActivityEvent> activities;
    std::size_t novelty_prompts = 0;
};

/// Runs a source through both recognition layers on the calling thread,
/// auto-ignoring novelty candidates. `emit` (optional) receives the wire
/// lines a session would publish, frames excluded.
OfflineRun run_offline(FrameSource& source, std::shared_ptr<const ModelSnapshot> snapshot,
                       RecognizerConfig cfg = {}, const std::function<void(const std::string&)>& emit = {});

/// Bounded outbound queue. When an offer finds the queue full the subscriber
/// receives error{overflow} and is closed; the publisher never waits.
class Subscriber {
public:
    explicit Subscriber(std::size_t capacity = kSubscriberQueueCapacity) : capacity_(capacity) {}

    /// Returns false once closed.
    bool offer(std::string line);
    /// Like offer, but bypasses the capacity check (connection-local replies).
    void offer_local(std::string line);
    std::optional<std::string> pop(std::chrono::milliseconds timeout);
    std::vector<std::string> drain();
    void close();

    bool closed() const;
    bool overflowed() const;
    /// Waits until the queue is empty and closed; false on timeout.
    bool wait_closed(std::chrono::milliseconds timeout) const;

private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::deque<std::string> queue_;
    bool closed_ = false;
    bool overflowed_ = false;
};

struct EngineConfig {
    TrainConfig train;
    RecognizerConfig recognizer;
    /// Stored samples are written back here after every registry change.
    std::optional<std::filesystem::path> dataset_path;
    /// Retrained snapshots are saved here.
    std::optional<std::filesystem::path> snapshot_path;
    double max_frame_rate_hz = 5.0;
};

enum class RunState { Running, Paused, Stopped, Finished };
const char* to_string(RunState s);

class Session;

/// Owns the registry, the current snapshot and all sessions. The registry is
/// only mutated from session pipeline threads under the engine lock.
class Engine {
public:
    Engine(PatternRegistry registry, std::shared_ptr<const ModelSnapshot> snapshot, EngineConfig cfg = {});
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Validates the source and starts the pipeline. `first` is attached
    /// before any event is published.
    std::string start_session(const SourceSpec& source, std::shared_ptr<Subscriber> first = nullptr,
                              const std::function<void(const std::string&)>& before_start = {});
    std::string start_session(std::unique_ptr<FrameSource> source, std::shared_ptr<Subscriber> first = nullptr,
                              const std::function<void(const std::string&)>& before_start = {});

    /// Late join: the subscriber first gets a registry_update carrying the
    /// session state, then live events.
    void subscribe(const std::string& session_id, std::shared_ptr<Subscriber> sub);
    std::shared_ptr<Subscriber> subscribe(const std::string& session_id);

    /// Queues a session command; its ack or error appears on the session
    /// stream. Throws StateError when the session has ended.
    void submit(const std::string& session_id, Command cmd);

    /// Blocks until the session's pipeline thread has exited.
    void wait(const std::string& session_id);
    std::optional<RunState> state(const std::string& session_id) const;
    void stop_all();

    std::shared_ptr<const ModelSnapshot> snapshot() const;
    PatternRegistry registry() const;
    /// Minute timeline of every activity event published by any session.
    std::vector<TimelineEntry> timeline() const;
    const EngineConfig& config() const noexcept { return cfg_; }

private:
    friend class Session;
    std::shared_ptr<Session> find(const std::string& id) const;
    std::shared_ptr<const ModelSnapshot> install(ModelSnapshot snap);
    /// Returns the new registry version.
    std::uint64_t add_pattern(const std::string& name, const std::string& activity,
                              std::vector<FeatureVector> samples, std::size_t expected);
    bool has_pattern(const std::string& name) const;
    void record_activity(const ActivityEvent& event);

    EngineConfig cfg_;
    mutable std::mutex mu_;
    PatternRegistry registry_;
    std::shared_ptr<const ModelSnapshot> snapshot_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    Timeline timeline_;
    std::uint64_t next_session_ = 1;
};

/// NDJSON over TCP. Each connection may start or subscribe to one session
/// and send commands to it.
class Server {
public:
    Server(Engine& engine, const Endpoint& endpoint);
    ~Server();

    std::uint16_t port() const noexcept { return listener_.port(); }
    /// Accept loop; returns after stop().
    void run();
    void stop();

private:
    void serve(TcpStream stream);

    Engine& engine_;
    TcpListener listener_;
    std::mutex mu_;
    std::vector<std::thread> workers_;
    std::vector<std::weak_ptr<TcpStream>> live_;
    bool stopping_ = false;
};

}  // namespace strata
