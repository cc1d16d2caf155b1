#pragma once
// T_data / T_comp bookkeeping with a per-stage breakdown.

#include <cstdint>
#include <string>
#include <vector>

namespace art {

struct LedgerStage {
    std::string name;
    std::int64_t t_data = 0;
    std::int64_t t_comp = 0;
};

class BudgetLedger {
public:
    void begin_stage(std::string name) { stages_.push_back({std::move(name), 0, 0}); }

    void add_data(std::int64_t n = 1) {
        ensure();
        stages_.back().t_data += n;
        t_data_ += n;
    }
    void add_comp(std::int64_t n = 1) {
        ensure();
        stages_.back().t_comp += n;
        t_comp_ += n;
    }

    std::int64_t t_data() const { return t_data_; }
    std::int64_t t_comp() const { return t_comp_; }
    const std::vector<LedgerStage>& stages() const { return stages_; }

    // Fold another ledger's stages in (per-worker ledgers merged at the end).
    void merge(const BudgetLedger& o) {
        for (const auto& s : o.stages_) stages_.push_back(s);
        t_data_ += o.t_data_;
        t_comp_ += o.t_comp_;
    }

    bool consistent() const {
        std::int64_t a = 0, b = 0;
        for (const auto& s : stages_) {
            a += s.t_data;
            b += s.t_comp;
        }
        return a == t_data_ && b == t_comp_;
    }

private:
    void ensure() {
        if (stages_.empty()) begin_stage("default");
    }
    std::vector<LedgerStage> stages_;
    std::int64_t t_data_ = 0;
    std::int64_t t_comp_ = 0;
};

}  // namespace art
