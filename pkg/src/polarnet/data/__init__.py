from .augment import augment_scale, draw_groups, read_group_log, write_group_log
from .cvds import CvdsError, read_cvds, write_cvds
from .dataset import Dataset
from .generators import MODULATIONS, BlobSpec, ModulationSpec, gen_blobs, gen_modulation
