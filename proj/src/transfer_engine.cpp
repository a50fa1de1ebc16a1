#include "oocmem/transfer_engine.hpp"

#include <cassert>
#include <chrono>
#include <exception>
#include <numeric>

#include "oocmem/error.hpp"

namespace oocmem {
namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

TransferEngine::TransferEngine(std::uint64_t ram_limit, unsigned worker_count) : ledger_(ram_limit) {
  if (worker_count == 0) raise(ErrorCode::InvalidArgument, "transfer engine needs at least one worker");
  workers_.reserve(worker_count);
  for (unsigned i = 0; i < worker_count; ++i) workers_.emplace_back([this] { worker_loop(); });
}

TransferEngine::~TransferEngine() { shutdown(false); }

TransferToken TransferEngine::submit(TransferRequest request) {
  if (!request.spans.empty()) {
    auto total = std::accumulate(request.spans.begin(), request.spans.end(), std::uint64_t{0},
                                 [](std::uint64_t acc, const ChunkSpan& s) { return acc + s.length; });
    if (total != request.byte_len)
      raise(ErrorCode::InvalidArgument, "span lengths do not add up to the transfer size");
    if (request.io == nullptr || request.buffer == nullptr)
      raise(ErrorCode::InvalidArgument, "transfer without backend or buffer");
  } else if (request.direction == Direction::SwapIn && request.byte_len > 0) {
    raise(ErrorCode::InvalidArgument, "swap-in without spans");
  }

  std::unique_lock lock(mutex_);
  if (stopping_) raise(ErrorCode::TransferFailed, "transfer engine is shut down");

  if (request.direction == Direction::SwapIn) {
    if (!ledger_.try_begin_swap_in(request.byte_len))
      raise(ErrorCode::RamReservationFailed,
            "swap-in of " + std::to_string(request.byte_len) + " bytes exceeds headroom of " +
                std::to_string(ledger_.headroom()));
  } else {
    ledger_.begin_swap_out(request.byte_len);
  }

  auto token = next_token_++;
  bool reuse = request.direction == Direction::SwapOut && request.spans.empty();
  auto [it, inserted] = live_.emplace(token, Entry{std::move(request), TransferState::Queued});
  assert(inserted);

  if (reuse) {
    // Nothing to write: the copy already on disk stays valid.
    auto& entry = it->second;
    TransferOutcome outcome;
    outcome.direction = Direction::SwapOut;
    outcome.handle = entry.request.handle;
    outcome.byte_len = entry.request.byte_len;
    outcome.started_ns = outcome.finished_ns = now_ns();
    freed_total_ += entry.request.byte_len;
    finish_locked(token, entry, std::move(outcome));
    done_cv_.notify_all();
    return token;
  }

  queue_.push_back(token);
  work_cv_.notify_one();
  return token;
}

void TransferEngine::worker_loop() {
  std::unique_lock lock(mutex_);
  for (;;) {
    work_cv_.wait(lock, [&] { return stopping_ || (!paused_ && !queue_.empty()); });
    if (stopping_ && (!drain_ || queue_.empty())) return;
    if (paused_ && !stopping_) continue;
    if (queue_.empty()) continue;

    auto token = queue_.front();
    queue_.pop_front();
    auto& entry = live_.at(token);
    entry.state = TransferState::Running;
    ++running_;
    // The request is not touched by anyone else while running.
    auto* request = &entry.request;
    lock.unlock();

    TransferOutcome outcome;
    outcome.direction = request->direction;
    outcome.handle = request->handle;
    outcome.byte_len = request->byte_len;
    outcome.started_ns = now_ns();
    try {
      std::uint64_t offset = 0;
      for (const auto& span : request->spans) {
        if (request->direction == Direction::SwapIn)
          request->io->read(span, request->buffer + offset);
        else
          request->io->write(span, request->buffer + offset);
        offset += span.length;
      }
      outcome.bytes_transferred = offset;
      outcome.state = TransferState::Done;
    } catch (const std::exception& e) {
      outcome.state = TransferState::Failed;
      outcome.error = e.what();
    }
    outcome.finished_ns = now_ns();

    lock.lock();
    --running_;
    if (outcome.ok() && outcome.direction == Direction::SwapOut) freed_total_ += outcome.byte_len;
    finish_locked(token, live_.at(token), std::move(outcome));
    done_cv_.notify_all();
    auto hook = hook_;
    lock.unlock();
    if (hook) hook();
    lock.lock();
  }
}

void TransferEngine::finish_locked(TransferToken token, Entry& entry, TransferOutcome outcome) {
  outcome.token = token;
  entry.state = outcome.state;
  if (!outcome.ok()) failures_.emplace(token, outcome.error);
  completed_.push_back(std::move(outcome));
}

void TransferEngine::apply_ledger_locked(const TransferOutcome& outcome) {
  if (outcome.direction == Direction::SwapIn) {
    if (outcome.ok())
      ledger_.complete_swap_in(outcome.byte_len);
    else
      ledger_.abort_swap_in(outcome.byte_len);
  } else {
    if (outcome.ok())
      ledger_.complete_swap_out(outcome.byte_len);
    else
      ledger_.abort_swap_out(outcome.byte_len);
  }
}

std::vector<TransferOutcome> TransferEngine::poll_completions() {
  std::lock_guard lock(mutex_);
  std::vector<TransferOutcome> out;
  out.swap(completed_);
  for (const auto& outcome : out) {
    apply_ledger_locked(outcome);
    live_.erase(outcome.token);
  }
  return out;
}

TransferState TransferEngine::state(TransferToken token) const {
  std::lock_guard lock(mutex_);
  if (token == 0 || token >= next_token_) raise(ErrorCode::InvalidArgument, "unknown transfer token");
  if (auto it = live_.find(token); it != live_.end()) return it->second.state;
  return failures_.count(token) ? TransferState::Failed : TransferState::Done;
}

void TransferEngine::wait_for(TransferToken token) {
  assert_outside_domain();
  std::unique_lock lock(mutex_);
  if (token == 0 || token >= next_token_) raise(ErrorCode::InvalidArgument, "unknown transfer token");
  done_cv_.wait(lock, [&] {
    auto it = live_.find(token);
    return it == live_.end() || it->second.state == TransferState::Done ||
           it->second.state == TransferState::Failed;
  });
  if (auto it = failures_.find(token); it != failures_.end())
    raise(ErrorCode::TransferFailed, "transfer " + std::to_string(token) + ": " + it->second);
}

void TransferEngine::wait_for_freed(std::uint64_t bytes) {
  assert_outside_domain();
  std::unique_lock lock(mutex_);
  auto outstanding = [&] {
    std::uint64_t sum = 0;
    for (const auto& [token, entry] : live_)
      if (entry.request.direction == Direction::SwapOut &&
          (entry.state == TransferState::Queued || entry.state == TransferState::Running))
        sum += entry.request.byte_len;
    return sum;
  };
  if (bytes > outstanding())
    raise(ErrorCode::WaitImpossible, "only " + std::to_string(outstanding()) + " bytes are being freed, " +
                                         std::to_string(bytes) + " requested");
  auto target = freed_total_ + bytes;
  done_cv_.wait(lock, [&] { return freed_total_ >= target || outstanding() == 0; });
  if (freed_total_ < target) raise(ErrorCode::WaitImpossible, "swap-outs failed before freeing enough RAM");
}

void TransferEngine::shutdown(bool drain) {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    if (shut_down_) return;
    shut_down_ = true;
    stopping_ = true;
    drain_ = drain;
    paused_ = false;
    if (!drain) {
      for (auto token : queue_) {
        auto& entry = live_.at(token);
        TransferOutcome outcome;
        outcome.direction = entry.request.direction;
        outcome.handle = entry.request.handle;
        outcome.byte_len = entry.request.byte_len;
        outcome.state = TransferState::Failed;
        outcome.cancelled = true;
        outcome.error = "cancelled";
        finish_locked(token, entry, std::move(outcome));
      }
      queue_.clear();
    }
    workers.swap(workers_);
  }
  work_cv_.notify_all();
  done_cv_.notify_all();
  for (auto& w : workers) w.join();
}

void TransferEngine::pause() {
  std::lock_guard lock(mutex_);
  paused_ = true;
}

void TransferEngine::resume() {
  {
    std::lock_guard lock(mutex_);
    paused_ = false;
  }
  work_cv_.notify_all();
}

void TransferEngine::set_completion_hook(std::function<void()> hook) {
  std::lock_guard lock(mutex_);
  hook_ = std::move(hook);
}

void TransferEngine::set_domain_probe(std::function<bool()> probe) {
  std::lock_guard lock(mutex_);
  domain_probe_ = std::move(probe);
}

void TransferEngine::assert_outside_domain() const {
  std::function<bool()> probe;
  {
    std::lock_guard lock(mutex_);
    probe = domain_probe_;
  }
  (void)probe;
  assert((!probe || !probe()) && "waiting on transfers while holding the manager lock");
}

BudgetLedger TransferEngine::ledger() const {
  std::lock_guard lock(mutex_);
  return ledger_;
}

bool TransferEngine::try_reserve_resident(std::uint64_t bytes) {
  std::lock_guard lock(mutex_);
  return ledger_.try_reserve_resident(bytes);
}

void TransferEngine::release_resident(std::uint64_t bytes) {
  std::lock_guard lock(mutex_);
  ledger_.release_resident(bytes);
}

void TransferEngine::add_swap_used(std::uint64_t bytes) {
  std::lock_guard lock(mutex_);
  ledger_.add_swap_used(bytes);
}

void TransferEngine::sub_swap_used(std::uint64_t bytes) {
  std::lock_guard lock(mutex_);
  ledger_.sub_swap_used(bytes);
}

std::size_t TransferEngine::queued_count() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::size_t TransferEngine::in_flight_count() const {
  std::lock_guard lock(mutex_);
  return queue_.size() + running_;
}

}  // namespace oocmem
