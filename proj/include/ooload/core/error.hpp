#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ooload {

// Root of every error raised by this library. The concrete subclass names
// double as the error kind reported by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define OOLOAD_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                     \
   public:                                                        \
    using Error::Error;                                           \
    const char* kind() const noexcept override { return #Name; }  \
  }

OOLOAD_DEFINE_ERROR(InvalidInput);
OOLOAD_DEFINE_ERROR(InvalidSpec);
OOLOAD_DEFINE_ERROR(DuplicateKey);
OOLOAD_DEFINE_ERROR(NotFound);
OOLOAD_DEFINE_ERROR(DecodeError);
OOLOAD_DEFINE_ERROR(ConnectError);
OOLOAD_DEFINE_ERROR(StartupError);
OOLOAD_DEFINE_ERROR(ServerError);
OOLOAD_DEFINE_ERROR(StateError);

#undef OOLOAD_DEFINE_ERROR

// Raised when a batch cannot be delivered because some of its items failed
// after retries. Carries the canonical text form of every failed id.
class BatchError : public Error {
 public:
  BatchError(const std::string& what, std::vector<std::string> failed_ids)
      : Error(what), failed_ids_(std::move(failed_ids)) {}
  const char* kind() const noexcept override { return "BatchError"; }
  const std::vector<std::string>& failed_ids() const noexcept { return failed_ids_; }

 private:
  std::vector<std::string> failed_ids_;
};

}  // namespace ooload
