from .analysis import BiometricUsage, IapAssessment, assess_iap, detect_biometric_functions
from .cil import CilModule, parse_cil
from .il2cpp import Il2cppSymbols, scan_il2cpp_metadata

__all__ = ["BiometricUsage", "CilModule", "IapAssessment", "Il2cppSymbols", "assess_iap",
           "detect_biometric_functions", "parse_cil", "scan_il2cpp_metadata"]
