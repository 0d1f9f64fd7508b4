#ifndef ELIS_GROUND_TRUTH_H_
#define ELIS_GROUND_TRUTH_H_

#include <stdexcept>

#include "elis/types.h"

// Access to the hidden response length of a prompt. Scheduling policies
// other than the SJF oracle must not include this header.
namespace elis::ground_truth {

class LeakDetected : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// While a DenyScope is alive on the current thread, OutputLength() throws
// LeakDetected. The check compiles away unless ELIS_GROUND_TRUTH_AUDIT is
// defined.
class DenyScope {
 public:
  DenyScope();
  ~DenyScope();
  DenyScope(const DenyScope&) = delete;
  DenyScope& operator=(const DenyScope&) = delete;
};

bool AuditEnabled();

}  // namespace elis::ground_truth

#endif  // ELIS_GROUND_TRUTH_H_
