#pragma once

#include <stdexcept>
#include <string>

namespace engram_ledger {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// hashing / sparse coding
struct DimensionMismatch : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct PopulationMismatch : Error { using Error::Error; };

// ledger
struct RejectedInvalid : Error { using Error::Error; };
struct InvalidRemote : Error { using Error::Error; };
struct UnknownBlock : Error { using Error::Error; };

// sharding
struct BadSegmentSize : Error { using Error::Error; };
struct NotEnoughNodes : Error { using Error::Error; };
struct MissingContext : Error { using Error::Error; };

// simulation / adversary
struct ConfigInvalid : Error { using Error::Error; };
struct BadScenario : Error { using Error::Error; };
struct DegenerateTraining : Error { using Error::Error; };

// memory chain
struct PoolTooSmall : Error { using Error::Error; };
struct EmptyEpisode : Error { using Error::Error; };
struct UnknownEpisode : Error { using Error::Error; };
struct BadIndex : Error { using Error::Error; };
struct NoSuccessor : Error { using Error::Error; };

// config / io
struct ParseError : Error { using Error::Error; };
struct UnknownKey : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace engram_ledger
