#pragma once

#include <stdexcept>
#include <string>

namespace argmine {

/// Base class for every domain error raised by the library. The CLI maps
/// these to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ARGMINE_DEFINE_ERROR(Name) \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

ARGMINE_DEFINE_ERROR(StructuralError);   // cycles in a post forest
ARGMINE_DEFINE_ERROR(IngestionError);    // malformed or orphaned input records
ARGMINE_DEFINE_ERROR(CapacityError);     // user-token vocabulary exhausted
ARGMINE_DEFINE_ERROR(SplitError);
ARGMINE_DEFINE_ERROR(InputError);
ARGMINE_DEFINE_ERROR(AnnotationError);
ARGMINE_DEFINE_ERROR(MappingError);      // unknown relation fine type
ARGMINE_DEFINE_ERROR(NumericError);
ARGMINE_DEFINE_ERROR(LabelError);        // gold path violates the BIO mask
ARGMINE_DEFINE_ERROR(PromptError);
ARGMINE_DEFINE_ERROR(ContractError);
ARGMINE_DEFINE_ERROR(BatchingError);
ARGMINE_DEFINE_ERROR(ConfigError);
ARGMINE_DEFINE_ERROR(SchemaError);

#undef ARGMINE_DEFINE_ERROR

}  // namespace argmine
