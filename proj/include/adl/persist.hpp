#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "adl/engine.hpp"

namespace adl {

/// A store directory: `journal.log`, `snapshot/<seq>/state`, `events.log`,
/// `inbox/<user>`, `lock`. Opening replays the newest complete snapshot plus
/// the journal tail and keeps the directory locked until destruction.
class Store {
 public:
  static void init(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  explicit Store(std::filesystem::path dir);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  Engine& engine() { return engine_; }
  const std::filesystem::path& dir() const { return dir_; }
  long long seq() const { return seq_; }

  /// Writes `snapshot/<seq>/state` for the current state.
  void snapshot();
  /// Snapshot when this many records accumulated since the last one.
  void set_snapshot_interval(long long n) { interval_ = n; }

  /// Saves the trace of the last transaction for `adl tx last`.
  void save_last(const TxResult& r) const;
  std::string load_last() const;

 private:
  void replay();
  void append(const std::vector<Fields>& ops, const Session& s, Date when);

  std::filesystem::path dir_;
  Engine engine_;
  int lock_fd_ = -1;
  long long seq_ = 0;
  long long snap_seq_ = 0;
  long long interval_ = 5000;
};

/// Parses one journal line `seq|timestamp|user|op|k=v ...`.
struct JournalLine {
  long long seq = 0;
  long long when = 0;
  std::string user;
  Fields op;
  static JournalLine parse(const std::string& line);
  std::string render() const;
};

}  // namespace adl
