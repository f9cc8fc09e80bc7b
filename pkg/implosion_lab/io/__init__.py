from .csv_writer import write_table, read_table, write_json, read_json
from .hdf_writer import write_fields, read_fields
from .run_config import RunConfig, TrajectoryConfig
