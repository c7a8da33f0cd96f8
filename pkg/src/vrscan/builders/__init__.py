"""Deterministic encoders used to produce test fixtures and synthetic corpora:
binary manifests, DEX files, CIL assemblies, IL2CPP metadata and APK archives."""
