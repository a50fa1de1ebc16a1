#include "oocmem/swap_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <system_error>
#include <thread>

#include "oocmem/config.hpp"
#include "oocmem/error.hpp"

namespace oocmem {
namespace {

// Process-wide so that several managers in one process never share a name.
std::atomic<std::uint32_t> g_file_counter{0};

[[noreturn]] void io_error(const char* op, const ChunkSpan& span, const std::string& why) {
  raise(ErrorCode::IoFailure, std::string(op) + " " + to_string(span) + ": " + why);
}

}  // namespace

SwapStore::SwapStore(SwapStoreConfig config, TransferEngine& engine)
    : config_(std::move(config)), engine_(engine) {
  if (config_.file_size == 0) raise(ErrorCode::InvalidArgument, "swap file size must be positive");
  std::error_code ec;
  std::filesystem::create_directories(config_.dir, ec);
  add_file();
}

SwapStore::~SwapStore() {
  std::unique_lock lock(files_mutex_);
  for (auto fd : fds_) ::close(fd);
  for (const auto& p : paths_) {
    std::error_code ec;
    std::filesystem::remove(p, ec);
  }
}

void SwapStore::add_file() {
  auto index = g_file_counter.fetch_add(1);
  auto path = config_.dir / ("oocmem-" + std::to_string(::getpid()) + "-" + std::to_string(index) + ".swap");
  int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) raise(ErrorCode::IoFailure, "cannot create swap file " + path.string() + ": " + std::strerror(errno));
  if (::ftruncate(fd, static_cast<off_t>(config_.file_size)) != 0) {
    int err = errno;
    ::close(fd);
    std::filesystem::remove(path);
    raise(ErrorCode::IoFailure, "cannot size swap file " + path.string() + ": " + std::strerror(err));
  }
  {
    std::unique_lock lock(files_mutex_);
    fds_.push_back(fd);
    paths_.push_back(path);
  }
  auto file = allocator_.add_file(config_.file_size);
  if (extend_listener_ && file > 0) extend_listener_(file);
}

std::vector<std::filesystem::path> SwapStore::file_paths() const {
  std::shared_lock lock(files_mutex_);
  return paths_;
}

int SwapStore::fd_for(std::uint32_t file) const {
  std::shared_lock lock(files_mutex_);
  if (file >= fds_.size()) return -1;
  return fds_[file];
}

void SwapStore::read(const ChunkSpan& span, std::byte* dest) {
  int fd = fd_for(span.file_index);
  if (fd < 0) io_error("read", span, "no such swap file");
  if (config_.io_latency.count() > 0) std::this_thread::sleep_for(config_.io_latency);
  std::uint64_t done = 0;
  while (done < span.length) {
    auto n = ::pread(fd, dest + done, span.length - done, static_cast<off_t>(span.offset + done));
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) io_error("read", span, std::strerror(errno));
    if (n == 0) io_error("read", span, "unexpected end of file");
    done += static_cast<std::uint64_t>(n);
  }
  bytes_read_ += span.length;
}

void SwapStore::write(const ChunkSpan& span, const std::byte* src) {
  int fd = fd_for(span.file_index);
  if (fd < 0) io_error("write", span, "no such swap file");
  if (config_.io_latency.count() > 0) std::this_thread::sleep_for(config_.io_latency);
  std::uint64_t done = 0;
  while (done < span.length) {
    auto n = ::pwrite(fd, src + done, span.length - done, static_cast<off_t>(span.offset + done));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) io_error("write", span, n < 0 ? std::strerror(errno) : "short write");
    done += static_cast<std::uint64_t>(n);
  }
  bytes_written_ += span.length;
}

std::vector<ChunkSpan> SwapStore::allocate_spans(std::uint64_t bytes) {
  if (bytes == 0) raise(ErrorCode::InvalidArgument, "allocation of zero bytes");

  auto attempt = [&]() -> std::optional<std::vector<ChunkSpan>> {
    auto spans = allocator_.allocate(bytes);
    if (spans) engine_.add_swap_used(bytes);
    return spans;
  };

  if (auto spans = attempt()) return *spans;

  if (allocator_.free_bytes() + cached_bytes_ >= bytes) {
    purge_clean_copies(bytes - allocator_.free_bytes());
    if (auto spans = attempt()) return *spans;
  }

  bool extend = false;
  switch (config_.policy) {
    case SwapPolicy::Fail:
      break;
    case SwapPolicy::AutoExtend:
      extend = true;
      break;
    case SwapPolicy::Interactive:
      if (prompt_) {
        ExtendRequest req{bytes, allocator_.provisioned_bytes(), allocator_.free_bytes(), config_.file_size};
        extend = prompt_(req);
      }
      break;
  }

  if (extend) {
    while (allocator_.free_bytes() < bytes) {
      std::error_code ec;
      auto space = std::filesystem::space(config_.dir, ec);
      if (ec || space.available < config_.file_size) break;
      add_file();
    }
    if (auto spans = attempt()) return *spans;
  }

  if (cached_bytes_ > 0) {
    purge_clean_copies(cached_bytes_);
    if (auto spans = attempt()) return *spans;
  }

  raise(ErrorCode::SwapFull, "cannot place " + std::to_string(bytes) + " bytes: " +
                                 std::to_string(allocator_.free_bytes()) + " of " +
                                 std::to_string(allocator_.provisioned_bytes()) + " swap bytes free, policy " +
                                 std::string(to_string(config_.policy)));
}

void SwapStore::free_spans(std::span<const ChunkSpan> spans) {
  allocator_.free(spans);
  std::uint64_t total = 0;
  for (const auto& s : spans) total += s.length;
  engine_.sub_swap_used(total);
}

SwapStore::Entry& SwapStore::entry(HandleId id) {
  auto slot = id.slot();
  if (slot >= entries_.size()) entries_.resize(slot + 1);
  return entries_[slot];
}

const SwapStore::Entry* SwapStore::find(HandleId id) const {
  auto slot = id.slot();
  if (slot >= entries_.size() || !entries_[slot].has_copy) return nullptr;
  return &entries_[slot];
}

std::vector<ChunkSpan> SwapStore::spans_of(const Entry& e, std::uint32_t slot) const {
  if (!e.has_copy) return {};
  if (e.multi) return split_spans_.at(slot);
  return {ChunkSpan{e.file, e.offset, e.length}};
}

std::vector<ChunkSpan> SwapStore::spans_of(HandleId id) const {
  const auto* e = find(id);
  return e ? spans_of(*e, id.slot()) : std::vector<ChunkSpan>{};
}

void SwapStore::set_spans(Entry& e, std::uint32_t slot, std::vector<ChunkSpan> spans) {
  e.has_copy = 1;
  e.cached = 0;
  e.seq = next_seq_++;
  e.length = 0;
  for (const auto& s : spans) e.length += s.length;
  if (spans.size() == 1) {
    e.multi = 0;
    e.file = spans.front().file_index;
    e.offset = spans.front().offset;
  } else {
    e.multi = 1;
    e.file = 0;
    e.offset = 0;
    split_spans_[slot] = std::move(spans);
  }
}

void SwapStore::drop_copy(Entry& e, std::uint32_t slot) {
  if (!e.has_copy) return;
  if (e.cached) {
    cached_.erase({e.seq, slot});
    cached_bytes_ -= e.length;
  }
  auto spans = spans_of(e, slot);
  if (e.multi) split_spans_.erase(slot);
  e = Entry{};
  free_spans(spans);
}

bool SwapStore::has_copy(HandleId id) const { return find(id) != nullptr; }

void SwapStore::discard(HandleId id) {
  if (id.slot() >= entries_.size()) return;
  drop_copy(entries_[id.slot()], id.slot());
}

void SwapStore::set_cached(HandleId id, bool cached) {
  auto slot = id.slot();
  if (slot >= entries_.size()) return;
  auto& e = entries_[slot];
  if (!e.has_copy || static_cast<bool>(e.cached) == cached) return;
  e.cached = cached ? 1 : 0;
  if (cached) {
    cached_.insert({e.seq, slot});
    cached_bytes_ += e.length;
  } else {
    cached_.erase({e.seq, slot});
    cached_bytes_ -= e.length;
  }
}

bool SwapStore::is_cached(HandleId id) const {
  const auto* e = find(id);
  return e && e->cached;
}

std::uint64_t SwapStore::purge_clean_copies(std::uint64_t bytes_wanted) {
  std::uint64_t freed = 0;
  while (freed < bytes_wanted && !cached_.empty()) {
    auto [seq, slot] = *cached_.begin();
    auto& e = entries_[slot];
    auto length = e.length;
    drop_copy(e, slot);
    freed += length;
    if (purge_listener_) purge_listener_(slot, length);
  }
  return freed;
}

TransferToken SwapStore::store(HandleId id, std::span<const std::byte> payload, bool reuse_clean) {
  auto& e = entry(id);
  TransferRequest req;
  req.direction = Direction::SwapOut;
  req.handle = id;
  req.byte_len = payload.size();
  req.io = this;
  req.buffer = const_cast<std::byte*>(payload.data());

  if (reuse_clean && e.has_copy && e.length == payload.size()) {
    set_cached(id, false);
    return engine_.submit(std::move(req));
  }

  drop_copy(e, id.slot());
  auto spans = allocate_spans(payload.size());
  // allocate_spans may purge other entries, but never grows entries_.
  auto& fresh = entry(id);
  req.spans = spans;
  set_spans(fresh, id.slot(), std::move(spans));
  try {
    return engine_.submit(std::move(req));
  } catch (...) {
    drop_copy(fresh, id.slot());
    throw;
  }
}

TransferToken SwapStore::load(HandleId id, std::span<std::byte> dest) {
  const auto* e = find(id);
  if (e == nullptr) raise(ErrorCode::UnknownHandle, "no swap copy for " + to_string(id));
  if (e->length != dest.size())
    raise(ErrorCode::InvalidArgument, "load buffer of " + std::to_string(dest.size()) + " bytes for a " +
                                          std::to_string(e->length) + "-byte block");
  TransferRequest req;
  req.direction = Direction::SwapIn;
  req.handle = id;
  req.spans = spans_of(*e, id.slot());
  req.byte_len = dest.size();
  req.buffer = dest.data();
  req.io = this;
  return engine_.submit(std::move(req));
}

}  // namespace oocmem
