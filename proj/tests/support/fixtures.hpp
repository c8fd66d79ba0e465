#pragma once

#include <memory>
#include <string>

#include "ecslab/core.hpp"
#include "ecslab/helmholtz.hpp"

namespace fixtures {

inline const std::string kReference = "R1234ze(E)";
inline const std::string kDataDir = ECSLAB_DATA_DIR;

inline const ecslab::FluidRegistry& registry() {
    static const auto reg = ecslab::FluidRegistry::load(kDataDir + "/fluids.json");
    return reg;
}

inline const ecslab::EosLibrary& eos() {
    static const ecslab::EosLibrary lib(kDataDir + "/eos");
    return lib;
}

inline std::shared_ptr<const ecslab::HelmholtzModel> truth(const std::string& id) {
    return std::make_shared<const ecslab::HelmholtzModel>(registry().at(id), eos().at(id));
}

inline std::shared_ptr<const ecslab::HelmholtzModel> reference() {
    static const auto ref = truth(kReference);
    return ref;
}

inline const char* const kShippedFluids[] = {"R1234ze(E)", "propane", "R143a", "R1234yf"};

} // namespace fixtures
