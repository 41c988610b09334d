__all__ = [
	"linalg",
	"coding",
	"blocks",
	"structomp",
	"baselines",
	"wavelet",
	"signals",
	"restricted_eigen",
	"config",
	"pipeline",
	"checks",
	"export",
	"logger",
	"utils",
]

__version__ = "0.1.0"
