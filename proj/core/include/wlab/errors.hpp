#pragma once

#include <stdexcept>
#include <string>

namespace wlab {

enum class Errc {
  OnDivisor,        // ||s_eps||^2 underflow at the evaluation point
  BadChart,         // point outside chart domain / invalid chart id
  Degenerate,       // omega fails the nondegeneracy threshold
  NotSymmetric,     // eigensolver input asymmetric beyond tolerance
  UnknownScene,
  BadParams,
  EmptyStratum,
  AllNearB,         // stratum rejection sampling exhausted
  NoConvergence,
  SingularFiber,    // d(pi) drops rank
  StepCollapse,     // adaptive integrator step underflow
  FiberLost,        // fiber re-projection Newton failed
  FlowEscaped,      // trajectory reached the divisor guard
  NotLocalModel,
  FrameFailure,     // symplectic Gram-Schmidt degenerated
  PathDependence,   // primitive H failed the two-path audit
  TrackLost,
  NoMatch,
  ConfigError,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::OnDivisor: return "OnDivisor";
    case Errc::BadChart: return "BadChart";
    case Errc::Degenerate: return "Degenerate";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::UnknownScene: return "UnknownScene";
    case Errc::BadParams: return "BadParams";
    case Errc::EmptyStratum: return "EmptyStratum";
    case Errc::AllNearB: return "AllNearB";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::SingularFiber: return "SingularFiber";
    case Errc::StepCollapse: return "StepCollapse";
    case Errc::FiberLost: return "FiberLost";
    case Errc::FlowEscaped: return "FlowEscaped";
    case Errc::NotLocalModel: return "NotLocalModel";
    case Errc::FrameFailure: return "FrameFailure";
    case Errc::PathDependence: return "PathDependence";
    case Errc::TrackLost: return "TrackLost";
    case Errc::NoMatch: return "NoMatch";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace wlab
