# Copyright 2026 The adjointc Authors
# SPDX-License-Identifier: Apache-2.0
"""Validates a bench report against the checked-in JSON schema."""
import json
import sys

import jsonschema


def main() -> int:
    schema_path, report_path = sys.argv[1], sys.argv[2]
    with open(schema_path) as f:
        schema = json.load(f)
    with open(report_path) as f:
        report = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(report), key=lambda e: list(e.path))
    for e in errors:
        path = "/".join(str(p) for p in e.path) or "<root>"
        print(f"{report_path}: {path}: {e.message}", file=sys.stderr)
    if errors:
        return 1
    if not report["records"] or not report["kernels"]:
        print("report has no records", file=sys.stderr)
        return 1
    print(f"{report_path}: valid ({len(report['kernels'])} kernel rows, {len(report['records'])} records)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
