import json
import os
import sys
from collections.abc import Sequence

import pandas as pd
from loguru import logger

OUTPUT_FORMATS = ("csv", "json")


class TableWriter:
    """
    Writes result tables and single records as CSV or JSON files and reads
    tables back for the analysis commands.

    CSV files are UTF-8 with LF line endings and a mandatory header; JSON
    tables are a list of row objects. The path "-" stands for stdout.
    """

    def __init__(self, output_format: str = "csv"):
        if output_format not in OUTPUT_FORMATS:
            raise ValueError(
                f"output format must be one of {OUTPUT_FORMATS}, got {output_format!r}"
            )
        self.output_format = output_format

    def write_frame(self, frame: pd.DataFrame, path: str):
        """
        Writes a DataFrame to ``path`` in the configured format.

        Args:
            frame: The table to write.
            path: Destination file, or "-" for stdout.
        """
        if self.output_format == "csv":
            text = frame.to_csv(index=False, lineterminator="\n")
        else:
            rows = frame.astype(object).where(frame.notna(), None)
            text = json.dumps(rows.to_dict(orient="records"), indent=2) + "\n"
        self._emit(text, path)
        logger.success(f"Wrote {len(frame)} rows to {self._describe(path)}")

    def write_record(self, record: dict, path: str):
        """
        Writes a single record: one-row CSV, or a JSON object.

        Args:
            record: Flat mapping of field name to value.
            path: Destination file, or "-" for stdout.
        """
        if self.output_format == "csv":
            self.write_frame(pd.DataFrame([record]), path)
            return
        self._emit(json.dumps(record, indent=2) + "\n", path)
        logger.success(f"Wrote record to {self._describe(path)}")

    @staticmethod
    def read_frames(paths: Sequence[str]) -> pd.DataFrame:
        """
        Reads and concatenates tables written by write_frame.

        The format is taken from the file suffix: ".json" is read as a list
        of row objects, anything else as CSV.
        """
        frames = []
        for path in paths:
            if not os.path.exists(path):
                raise FileNotFoundError(f"input table not found: {path}")
            if path.endswith(".json"):
                with open(path, encoding="utf-8") as handle:
                    frames.append(pd.DataFrame.from_records(json.load(handle)))
            else:
                frames.append(pd.read_csv(path, float_precision="round_trip"))
            logger.info(f"Read {len(frames[-1])} rows from {path}")
        if not frames:
            raise ValueError("no input tables given")
        return pd.concat(frames, ignore_index=True)

    @staticmethod
    def _emit(text: str, path: str):
        if path == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
            return
        directory = os.path.dirname(path)
        if directory and not os.path.exists(directory):
            os.makedirs(directory, exist_ok=True)
            logger.info(f"Created output directory: {directory}")
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)

    @staticmethod
    def _describe(path: str) -> str:
        return "stdout" if path == "-" else path
