from .device import FileDeviceStore as DeviceStore
from .server import FileServerStore as ServerStore
