from .client import Connection, RemoteNode, RemoteServerStore
from .frame import Op, Request, Response, VERSION, exception
from .service import NodeService, ServerService, serve_node, serve_server_store
from .status import Status, error_for, status_for
