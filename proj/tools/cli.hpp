#pragma once

#include <string>
#include <vector>

namespace mbrl::cli {

/// Exit codes of the `slbo_lab` tool.
inline constexpr int kOk = 0;
inline constexpr int kAssertionFailed = 1;
inline constexpr int kUsageError = 2;

/// CSV headers, one per emitted file kind.
inline constexpr const char* kVerifyHeader = "label,seed,lhs,rhs,margin,pass";
inline constexpr const char* kMetaHeader = "k,V_true,lower_bound,model_index,d_to_prev";
inline constexpr const char* kTraceHeader =
    "outer_iter,real_samples,eval_return_mean,eval_return_std,model_loss,policy_kl,entropy";
inline constexpr const char* kAblationRowsHeader = "axis,value,seed,final_return,real_samples,max_accepted_kl";
inline constexpr const char* kAblationCellsHeader = "axis,value,mean,std,n";

/// Parses argv and dispatches to verify, meta, slbo or ablate. Diagnostics go
/// to stderr, a one-line summary per output file to stdout.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace mbrl::cli
