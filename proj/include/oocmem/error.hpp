#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oocmem {

enum class ErrorCode {
  // core
  SizeExceedsRamLimit,
  OutOfSwapSpace,
  HandleStillAdhered,
  UnknownHandle,
  OutOfMemoryRequest,
  GroupExceedsRamLimit,
  ReadOnlyView,
  // scheduler
  DuplicateRegistration,
  NotResident,
  InsufficientEvictableBytes,
  NotSwapped,
  // swapstore
  SwapFull,
  DoubleFree,
  UnknownSpan,
  IoFailure,
  // aio
  RamReservationFailed,
  TransferFailed,
  WaitImpossible,
  // plumbing
  ConfigError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The code is the stable part; the
/// message carries context (sizes, handle ids, file offsets).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& what);

}  // namespace oocmem
