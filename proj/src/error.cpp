#include "oocmem/error.hpp"
#include "oocmem/types.hpp"

namespace oocmem {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SizeExceedsRamLimit: return "SizeExceedsRamLimit";
    case ErrorCode::OutOfSwapSpace: return "OutOfSwapSpace";
    case ErrorCode::HandleStillAdhered: return "HandleStillAdhered";
    case ErrorCode::UnknownHandle: return "UnknownHandle";
    case ErrorCode::OutOfMemoryRequest: return "OutOfMemoryRequest";
    case ErrorCode::GroupExceedsRamLimit: return "GroupExceedsRamLimit";
    case ErrorCode::ReadOnlyView: return "ReadOnlyView";
    case ErrorCode::DuplicateRegistration: return "DuplicateRegistration";
    case ErrorCode::NotResident: return "NotResident";
    case ErrorCode::InsufficientEvictableBytes: return "InsufficientEvictableBytes";
    case ErrorCode::NotSwapped: return "NotSwapped";
    case ErrorCode::SwapFull: return "SwapFull";
    case ErrorCode::DoubleFree: return "DoubleFree";
    case ErrorCode::UnknownSpan: return "UnknownSpan";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::RamReservationFailed: return "RamReservationFailed";
    case ErrorCode::TransferFailed: return "TransferFailed";
    case ErrorCode::WaitImpossible: return "WaitImpossible";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

std::string to_string(HandleId id) {
  return "#" + std::to_string(id.slot()) + "." + std::to_string(id.generation());
}

std::string to_string(const ChunkSpan& span) {
  return "(f" + std::to_string(span.file_index) + "," + std::to_string(span.offset) + "," +
         std::to_string(span.length) + ")";
}

std::string_view to_string(BlockState state) {
  switch (state) {
    case BlockState::Resident: return "RESIDENT";
    case BlockState::PreemptiveResident: return "PREEMPTIVE_RESIDENT";
    case BlockState::Swapped: return "SWAPPED";
    case BlockState::SwappingIn: return "SWAPPING_IN";
    case BlockState::SwappingOut: return "SWAPPING_OUT";
  }
  return "?";
}

}  // namespace oocmem
