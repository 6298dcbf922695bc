#include "adl/persist.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "adl/loader.hpp"

namespace adl {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMarker = "adelite-store 1";

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

JournalLine JournalLine::parse(const std::string& line) {
  auto parts = split(line, '|');
  if (parts.size() != 5) throw Error("malformed journal line: " + line, ErrorKind::Io);
  JournalLine j;
  try {
    j.seq = std::stoll(parts[0]);
    j.when = std::stoll(parts[1]);
  } catch (const std::exception&) {
    throw Error("malformed journal line: " + line, ErrorKind::Io);
  }
  j.user = unescape(parts[2]);
  j.op = Fields::parse(parts[4]);
  j.op.items.insert(j.op.items.begin(), {"op", parts[3]});
  return j;
}

std::string JournalLine::render() const {
  Fields rest;
  std::string name;
  for (auto& [k, v] : op.items) {
    if (k == "op")
      name = v;
    else
      rest.add(k, v);
  }
  return std::to_string(seq) + "|" + std::to_string(when) + "|" + escape(user) + "|" + name +
         "|" + rest.render();
}

bool Store::exists(const fs::path& dir) { return fs::is_regular_file(dir / "store.id"); }

void Store::init(const fs::path& dir) {
  if (exists(dir)) throw Error("store already initialized: " + dir.string());
  std::error_code ec;
  fs::create_directories(dir / "snapshot", ec);
  fs::create_directories(dir / "inbox", ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message(), ErrorKind::Io);
  std::ofstream(dir / "store.id") << kMarker << "\n";
  std::ofstream(dir / "journal.log", std::ios::app);
}

Store::Store(fs::path dir) : dir_(std::move(dir)) {
  if (!exists(dir_)) throw Error("no store at " + dir_.string() + " (run adl init)");
  lock_fd_ = ::open((dir_ / "lock").c_str(), O_RDWR | O_CREAT, 0644);
  if (lock_fd_ < 0) throw Error("cannot open store lock", ErrorKind::Io);
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error("store is locked by another process: " + dir_.string(), ErrorKind::Io);
  }
  engine_.set_work_root(dir_ / "work");
  replay();
  engine_.set_journal(
      [this](const std::vector<Fields>& ops, const Session& s, Date when) { append(ops, s, when); });
  engine_.set_event_sink([this](const std::string& line) {
    std::ofstream(dir_ / "events.log", std::ios::app) << line << "\n";
  });
}

Store::~Store() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

void Store::replay() {
  Database& db = engine_.db();
  auto schema_loader = [&db](const std::string& part, const std::string& text) {
    load_dsl(db.schema(), text, part);
  };
  // Newest snapshot whose state file ends with the completion marker.
  long long best = -1;
  if (fs::is_directory(dir_ / "snapshot"))
    for (auto& e : fs::directory_iterator(dir_ / "snapshot")) {
      long long n;
      try {
        n = std::stoll(e.path().filename().string());
      } catch (const std::exception&) {
        continue;
      }
      std::string text = read_all(e.path() / "state");
      if (n > best && text.size() >= 4 && text.substr(text.size() - 4) == "end\n") best = n;
    }
  if (best >= 0) {
    std::istringstream in(read_all(dir_ / "snapshot" / std::to_string(best) / "state"));
    for (std::string line; std::getline(in, line);) {
      if (line == "end" || line.empty()) continue;
      db.load_record(Fields::parse(line), schema_loader);
    }
    seq_ = snap_seq_ = best;
  }
  std::ifstream in(dir_ / "journal.log");
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    JournalLine j = JournalLine::parse(line);
    if (j.seq <= snap_seq_) continue;
    db.load_record(j.op, schema_loader);
    seq_ = j.seq;
  }
  engine_.invalidate_caches();
}

void Store::append(const std::vector<Fields>& ops, const Session& s, Date when) {
  std::string block;
  for (auto& op : ops) {
    JournalLine j{++seq_, when.seconds, s.user, op};
    block += j.render() + "\n";
    if (op.get("op") == "mail")
      std::ofstream(dir_ / "inbox" / unescape(op.get("user")), std::ios::app)
          << unescape(op.get("msg")) << "\n";
  }
  std::ofstream out(dir_ / "journal.log", std::ios::app | std::ios::binary);
  out << block;
  out.flush();
  if (!out) throw Error("journal write failed", ErrorKind::Io);
  if (seq_ - snap_seq_ >= interval_) snapshot();
}

void Store::snapshot() {
  fs::path d = dir_ / "snapshot" / std::to_string(seq_);
  fs::create_directories(d);
  std::ofstream out(d / "state", std::ios::binary | std::ios::trunc);
  for (auto& f : engine_.db().dump()) out << f.render() << "\n";
  out << "end\n";
  out.close();
  snap_seq_ = seq_;
}

void Store::save_last(const TxResult& r) const {
  std::ofstream out(dir_ / "last_tx.trace", std::ios::trunc);
  out << r.trace_text();
}

std::string Store::load_last() const { return read_all(dir_ / "last_tx.trace"); }

}  // namespace adl
