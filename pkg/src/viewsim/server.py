"""TCP server: scene hosting, per-connection sessions, frame streaming.

Each scene runs in its own host with a single simulation thread that only
ticks while at least one agent is attached. Ticks mutate the world under a
lock and publish an immutable snapshot; request workers render from the
latest snapshot without holding the lock, so a slow consumer never stalls
the simulation or other agents. Camera state is per-session: a following
agent inherits the scene mover, a detached one keeps a private pose.
"""

from __future__ import annotations

import logging
import math
import socket
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from . import protocol as proto
from .catalog import builtin_scenes
from .geometry import RigidPose, quat_from_euler_deg
from .render import CameraIntrinsics, CameraMotion, SceneGeometry, render_views
from .scene import Scene
from .world import Snapshot, World

log = logging.getLogger("viewsim.server")

DEFAULT_PORT = 8085


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    tick_rate: float = 60.0  # ticks per second; dt is its inverse
    scenes: list[Scene] = field(default_factory=builtin_scenes)


class SceneHost:
    """One scene's world, simulation thread and published snapshot."""

    def __init__(self, scene: Scene, tick_rate: float):
        self.scene = scene
        self.geometry = SceneGeometry(scene)
        self.tick_dt = 1.0 / tick_rate
        self.lock = threading.Lock()
        self.world = World(scene)
        self.snapshot: Snapshot = self.world.snapshot()
        self._agents = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def attach(self) -> Snapshot:
        with self.lock:
            self._agents += 1
            if self._agents == 1:
                self._stop.clear()
                self._thread = threading.Thread(
                    target=self._run, name=f"sim-{self.scene.name}", daemon=True
                )
                self._thread.start()
            return self.snapshot

    def detach(self) -> None:
        thread = None
        with self.lock:
            self._agents -= 1
            if self._agents == 0:
                self._stop.set()
                thread, self._thread = self._thread, None
        if thread is not None:
            thread.join(timeout=5.0)

    def _run(self) -> None:
        while not self._stop.wait(self.tick_dt):
            with self.lock:
                self.world.step(self.tick_dt)
                self.snapshot = self.world.snapshot()

    def mutate(self, fn) -> Snapshot:
        """Apply fn to the world under the lock and republish immediately,
        so the change is visible to the very next frame request."""
        with self.lock:
            fn(self.world)
            self.snapshot = self.world.snapshot()
            return self.snapshot

    def shutdown(self) -> None:
        with self.lock:
            self._stop.set()
            thread, self._thread = self._thread, None
        if thread is not None:
            thread.join(timeout=5.0)


@dataclass
class _Session:
    agent_id: int
    width: int
    height: int
    view_names: tuple[str, ...]
    compression: int
    scene_index: int
    follow: bool = True
    pose: RigidPose = field(default_factory=RigidPose)


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("peer closed the connection")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class Server:
    """Accepts agent connections and serves frames from the hosted scenes."""

    def __init__(self, config: ServerConfig | None = None):
        self.config = config or ServerConfig()
        if not self.config.scenes:
            raise ValueError("server needs at least one scene")
        self.hosts = [SceneHost(s, self.config.tick_rate) for s in self.config.scenes]
        self.port: int | None = None
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._sessions_lock = threading.Lock()
        self._session_sockets: set[socket.socket] = set()
        self._session_count = 0
        self._next_agent_id = 1
        self._closing = False

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.config.host, self.config.port))
        listener.listen(16)
        listener.settimeout(0.5)  # lets the accept loop notice shutdown
        self.port = listener.getsockname()[1]
        self._listener = listener
        self._closing = False
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        log.info("listening on %s:%d (%d scenes)", self.config.host, self.port, len(self.hosts))

    def stop(self) -> None:
        self._closing = True
        if self._listener is not None:
            try:
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._listener.close()
            except OSError:
                pass
        with self._sessions_lock:
            sockets = list(self._session_sockets)
        for sock in sockets:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                sock.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5.0)
            self._accept_thread = None
        for host in self.hosts:
            host.shutdown()
        log.info("stopped")

    def active_sessions(self) -> int:
        with self._sessions_lock:
            return self._session_count

    def __enter__(self) -> "Server":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- connection handling ---------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                sock, addr = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                return  # listener closed
            sock.settimeout(None)
            thread = threading.Thread(
                target=self._serve_connection, args=(sock, addr), daemon=True
            )
            thread.start()

    def _serve_connection(self, sock: socket.socket, addr) -> None:
        with self._sessions_lock:
            self._session_sockets.add(sock)
            self._session_count += 1
        session: _Session | None = None
        host: SceneHost | None = None
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            hello = _read_exact(sock, len(proto.HELLO))
            proto.check_hello(hello)
            sock.sendall(proto.HELLO)
            log.info("agent connected from %s:%d", *addr[:2])
            while True:
                header = _read_exact(sock, 5)
                opcode, length = struct.unpack("<BI", header)
                if length > proto.MAX_BODY:
                    raise proto.ProtocolError(f"body of {length} bytes exceeds the limit")
                body = _read_exact(sock, length)
                session, host, keep_going = self._dispatch(
                    sock, session, host, opcode, body
                )
                if not keep_going:
                    break
        except (ConnectionError, OSError):
            pass  # disconnects are routine
        except proto.ProtocolError as exc:
            self._try_send(sock, proto.encode_error(proto.ERR_BAD_REQUEST, str(exc)))
            log.warning("protocol violation from %s:%d: %s", addr[0], addr[1], exc)
        except Exception:
            self._try_send(sock, proto.encode_error(proto.ERR_INTERNAL, "internal error"))
            log.exception("internal error in session from %s:%d", *addr[:2])
        finally:
            if host is not None:
                host.detach()
            try:
                sock.close()
            except OSError:
                pass
            with self._sessions_lock:
                self._session_sockets.discard(sock)
                self._session_count -= 1
            who = f"agent {session.agent_id}" if session else "unregistered peer"
            log.info("%s disconnected", who)

    @staticmethod
    def _try_send(sock: socket.socket, data: bytes) -> None:
        try:
            sock.sendall(data)
        except OSError:
            pass

    # -- request dispatch ------------------------------------------------------

    def _dispatch(self, sock, session, host, opcode, body):
        if session is None and opcode != proto.OP_REGISTER:
            sock.sendall(
                proto.encode_error(proto.ERR_BAD_REQUEST, "register before anything else")
            )
            return session, host, True
        if opcode == proto.OP_REGISTER:
            if session is not None:
                sock.sendall(proto.encode_error(proto.ERR_BAD_REQUEST, "already registered"))
                return session, host, True
            req = proto.decode_register(body)
            with self._sessions_lock:
                agent_id = self._next_agent_id
                self._next_agent_id += 1
            session = _Session(
                agent_id=agent_id,
                width=req.width,
                height=req.height,
                view_names=req.view_names(),
                compression=req.compression,
                scene_index=0,
            )
            host = self.hosts[0]
            snapshot = host.attach()
            session.pose = RigidPose(
                snapshot.mover_position.copy(), snapshot.mover_orientation.copy()
            )
            reply = proto.RegisterReply(
                agent_id=agent_id,
                scene_names=tuple(h.scene.name for h in self.hosts),
                categories=tuple(host.scene.category_table()),
            )
            sock.sendall(proto.encode_register_reply(reply))
            log.info(
                "agent %d registered: %dx%d views=%s %s",
                agent_id,
                req.width,
                req.height,
                ",".join(session.view_names),
                "gzip" if req.compression else "raw",
            )
            return session, host, True

        if opcode == proto.OP_CHANGE_SCENE:
            index = proto.decode_change_scene(body)
            if index >= len(self.hosts):
                sock.sendall(
                    proto.encode_error(proto.ERR_UNKNOWN_SCENE, f"no scene with index {index}")
                )
                return session, host, True
            new_host = self.hosts[index]
            if new_host is not host:
                snapshot = new_host.attach()
                host.detach()
                host = new_host
            else:
                snapshot = host.snapshot
            session.scene_index = index
            session.follow = True
            session.pose = RigidPose(
                snapshot.mover_position.copy(), snapshot.mover_orientation.copy()
            )
            sock.sendall(proto.encode_change_scene_reply(tuple(host.scene.category_table())))
            log.info("agent %d switched to scene %d (%s)", session.agent_id, index, host.scene.name)
            return session, host, True

        if opcode == proto.OP_GET_FRAME:
            proto.decode_empty(body)
            snapshot = host.snapshot
            views = self._render(session, host, snapshot)
            sock.sendall(proto.encode_frame_reply(views, session.compression))
            return session, host, True

        if opcode == proto.OP_SET_POSITION:
            x, y, z = proto.decode_vec3(body)
            if not all(math.isfinite(v) for v in (x, y, z)):
                sock.sendall(proto.encode_error(proto.ERR_BAD_REQUEST, "non-finite position"))
                return session, host, True
            if session.follow:
                host.mutate(lambda world: world.set_mover_position((x, y, z)))
            else:
                session.pose.position = np.array([x, y, z], dtype=np.float64)
            sock.sendall(proto.encode_ack(proto.OP_SET_POSITION))
            return session, host, True

        if opcode == proto.OP_SET_ROTATION:
            rx, ry, rz = proto.decode_vec3(body)
            if not all(math.isfinite(v) for v in (rx, ry, rz)):
                sock.sendall(proto.encode_error(proto.ERR_BAD_REQUEST, "non-finite rotation"))
                return session, host, True
            quat = quat_from_euler_deg(rx, ry, rz)
            if session.follow:
                host.mutate(lambda world: world.set_mover_orientation(quat))
            else:
                session.pose.orientation = quat
            sock.sendall(proto.encode_ack(proto.OP_SET_ROTATION))
            return session, host, True

        if opcode == proto.OP_TOGGLE_FOLLOW:
            proto.decode_empty(body)
            if session.follow:
                # keep the camera where the mover left it
                snapshot = host.snapshot
                session.pose = RigidPose(
                    snapshot.mover_position.copy(), snapshot.mover_orientation.copy()
                )
                session.follow = False
            else:
                session.follow = True
            sock.sendall(proto.encode_follow_reply(session.follow))
            log.info("agent %d follow=%s", session.agent_id, session.follow)
            return session, host, True

        if opcode == proto.OP_DELETE:
            proto.decode_empty(body)
            sock.sendall(proto.encode_ack(proto.OP_DELETE))
            log.info("agent %d deleted", session.agent_id)
            return session, host, False

        sock.sendall(proto.encode_error(proto.ERR_BAD_REQUEST, f"unknown opcode {opcode:#x}"))
        return session, host, True

    def _render(self, session: _Session, host: SceneHost, snapshot: Snapshot):
        scene = host.scene
        intr = CameraIntrinsics.from_fov(
            session.width, session.height, scene.camera.fov_deg, scene.camera.near, scene.camera.far
        )
        if session.follow:
            camera = CameraMotion(
                position=snapshot.mover_position,
                orientation=snapshot.mover_orientation,
                linear_velocity=snapshot.mover_linear_velocity,
                angular_velocity=snapshot.mover_angular_velocity,
            )
        else:
            camera = CameraMotion(
                position=session.pose.position, orientation=session.pose.orientation
            )
        return render_views(host.geometry, snapshot, camera, intr, views=session.view_names)
