#pragma once

#include <stdexcept>
#include <string>

namespace evfc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define EVFC_DEFINE_ERROR(Name)           \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// ring / scheme
EVFC_DEFINE_ERROR(InvalidModulus);
EVFC_DEFINE_ERROR(SecurityLevelTooLow);
EVFC_DEFINE_ERROR(ParameterMismatch);
EVFC_DEFINE_ERROR(NoiseOverflow);
EVFC_DEFINE_ERROR(MissingGaloisKey);
EVFC_DEFINE_ERROR(OutOfRange);

// vision / control
EVFC_DEFINE_ERROR(StageOutOfFrame);
EVFC_DEFINE_ERROR(AllDarkImage);
EVFC_DEFINE_ERROR(GainOverflow);

// pipeline
EVFC_DEFINE_ERROR(OverflowConfig);
EVFC_DEFINE_ERROR(ImageTooWide);
EVFC_DEFINE_ERROR(ZeroDenominator);

// wire format / transport
EVFC_DEFINE_ERROR(VersionMismatch);
EVFC_DEFINE_ERROR(TruncatedStream);
EVFC_DEFINE_ERROR(ChecksumFail);
EVFC_DEFINE_ERROR(PeerUnavailable);
EVFC_DEFINE_ERROR(ProtocolDesync);

#undef EVFC_DEFINE_ERROR

}  // namespace evfc
